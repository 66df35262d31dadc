"""Command-line surface: validate | generate | score | compare.

Exit codes: 0 ok, 1 validation failure, 2 runtime error. Findings and
summaries go to stdout as JSON; logs go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import corpus as corpus_mod
from . import report as report_mod
from . import stats as stats_mod
from . import teacher as teacher_mod
from .embedder import EmbeddingError, ProviderConfig, ProviderKind
from .hashutil import seeded_shuffle
from .textseg import load_abbreviations

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

METRIC_ALIASES = {"cec": "cec_sym"}
COMPARABLE_METRICS = {
    "bleu", "rouge1", "rouge2", "rougeL", "meteor", "embf1",
    "cec_forward", "cec_backward", "cec_sym",
}


def _atomic_write(path: Path, content: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _provider_from_args(args: argparse.Namespace) -> ProviderConfig:
    kind = {
        "hashed-bow": ProviderKind.HASHED_BOW,
        "precomputed": ProviderKind.PRECOMPUTED,
        "remote": ProviderKind.REMOTE,
    }[args.provider]
    return ProviderConfig(
        kind=kind,
        dimension=args.dim,
        endpoint=args.endpoint,
        model_name=args.embed_model,
        cache_path=args.cache,
    )


def cmd_validate(args: argparse.Namespace) -> int:
    findings: list[dict] = []
    try:
        loaded = corpus_mod.load_corpus(args.corpus)
    except corpus_mod.CorpusError as exc:
        findings.append({"severity": "error", "message": str(exc)})
        print(json.dumps({"ok": False, "findings": findings}, indent=2))
        return EXIT_VALIDATION
    summary = corpus_mod.validate_corpus(
        loaded,
        require_reference=args.require_reference,
        require_models=args.models or [],
    )
    for warning in summary.warnings:
        findings.append({"severity": "warning", "message": warning})
    payload = {
        "ok": True,
        "n_instances": summary.n_instances,
        "missing_reference": summary.missing_reference,
        "missing_generation": summary.missing_generation,
        "findings": findings,
    }
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    loaded = corpus_mod.load_corpus(args.corpus)
    if args.template:
        template = teacher_mod.PromptTemplate.load(args.template)
    else:
        template = teacher_mod.DEFAULT_TEMPLATE
    config = teacher_mod.EndpointConfig(
        endpoint=args.endpoint,
        model_name=args.model,
        max_tokens=args.max_tokens,
        cache_path=args.cache,
        requests_per_minute=args.rpm,
        timeout=args.timeout,
        concurrency=args.jobs,
    )
    outcome = teacher_mod.generate_explanations(loaded, template, config)
    corpus_mod.save_corpus(outcome.corpus, args.out)
    summary = {
        "generated": outcome.generated,
        "skipped": outcome.skipped,
        "cache_hits": outcome.cache_hits,
        "failed": len(outcome.failures),
        "failures": outcome.failures,
        "out": str(args.out),
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    loaded = corpus_mod.load_corpus(args.corpus)
    provider = _provider_from_args(args)
    abbreviations = load_abbreviations(args.abbrev) if args.abbrev else None
    settings = {
        "corpus": str(args.corpus),
        "models": args.models,
        "provider": provider.provider_id,
        "format": args.format,
    }
    metric_report, records = report_mod.score_corpus(
        loaded,
        models=args.models,
        provider=provider,
        settings=settings,
        jobs=args.jobs,
        abbreviations=abbreviations,
    )
    out = Path(args.out)
    _atomic_write(out, metric_report.render(args.format))
    if out.suffix:
        instances_path = out.with_suffix(".instances.jsonl")
    else:
        instances_path = Path(str(out) + ".instances.jsonl")
    lines = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    _atomic_write(instances_path, lines)
    print(
        json.dumps(
            {
                "report": str(out),
                "instances": str(instances_path),
                "n_instances": metric_report.n_instances,
                "skipped": metric_report.skipped,
                "partial": metric_report.partial,
            },
            indent=2,
        )
    )
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    metric_a = METRIC_ALIASES.get(args.metric_a, args.metric_a)
    metric_b = METRIC_ALIASES.get(args.metric_b, args.metric_b)
    for metric in (metric_a, metric_b):
        if metric not in COMPARABLE_METRICS:
            raise ValueError(f"unknown metric {metric!r}")
    records = []
    with open(args.scores, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    eligible = [
        r
        for r in records
        if not r.get("degenerate")
        and metric_a in r
        and metric_b in r
        and (args.model is None or r.get("model") == args.model)
    ]
    n = args.n if args.n is not None else len(eligible)
    if n > len(eligible):
        raise corpus_mod.InsufficientInstances(n, len(eligible))
    sampled = seeded_shuffle(eligible, args.seed)[:n]
    sample = stats_mod.PairedSample(
        a=[float(r[metric_a]) for r in sampled],
        b=[float(r[metric_b]) for r in sampled],
        labels=(args.metric_a, args.metric_b),
    )
    result = stats_mod.compare(sample)
    payload = result.to_json_dict()
    output = json.dumps(payload, indent=2)
    if args.out:
        _atomic_write(Path(args.out), output + "\n")
    print(output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ceceval",
        description=(
            "Score model-generated explanations against references "
            "(CEC, BLEU, ROUGE, METEOR, EmbF1) and compare metrics."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a JSONL corpus")
    p_validate.add_argument("--corpus", required=True)
    p_validate.add_argument("--require-reference", action="store_true")
    p_validate.add_argument("--models", nargs="*", default=[])
    p_validate.set_defaults(func=cmd_validate)

    p_generate = sub.add_parser("generate", help="fill missing references from a chat endpoint")
    p_generate.add_argument("--corpus", required=True)
    p_generate.add_argument("--template", default=None, help="JSON file with system/user texts")
    p_generate.add_argument("--endpoint", required=True)
    p_generate.add_argument("--model", default="teacher")
    p_generate.add_argument("--out", required=True)
    p_generate.add_argument("--cache", default=None)
    p_generate.add_argument("--rpm", type=float, default=None, help="requests per minute cap")
    p_generate.add_argument("--max-tokens", type=int, default=512)
    p_generate.add_argument("--timeout", type=float, default=30.0)
    p_generate.add_argument("--jobs", type=int, default=2)
    p_generate.set_defaults(func=cmd_generate)

    p_score = sub.add_parser("score", help="score models and write a report")
    p_score.add_argument("--corpus", required=True)
    p_score.add_argument("--models", nargs="+", required=True)
    p_score.add_argument(
        "--provider",
        choices=["hashed-bow", "precomputed", "remote"],
        default="hashed-bow",
    )
    p_score.add_argument("--dim", type=int, default=None)
    p_score.add_argument("--endpoint", default=None)
    p_score.add_argument("--embed-model", default=None)
    p_score.add_argument("--cache", default=None)
    p_score.add_argument("--out", required=True)
    p_score.add_argument("--format", choices=["md", "csv", "json"], default="md")
    p_score.add_argument("--abbrev", default=None, help="abbreviation list file")
    p_score.add_argument("--jobs", type=int, default=1)
    p_score.set_defaults(func=cmd_score)

    p_compare = sub.add_parser("compare", help="paired significance tests over a scores file")
    p_compare.add_argument("--scores", required=True, help="per-instance JSONL from score")
    p_compare.add_argument("--metric-a", required=True)
    p_compare.add_argument("--metric-b", required=True)
    p_compare.add_argument("--model", default=None)
    p_compare.add_argument("--n", type=int, default=None)
    p_compare.add_argument("--seed", type=int, default=0)
    p_compare.add_argument("--out", default=None)
    p_compare.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except corpus_mod.CorpusError as exc:
        log.error("%s", exc)
        if isinstance(exc, corpus_mod.InsufficientInstances):
            log.error("reduce --n or supply more scored instances")
            return EXIT_RUNTIME
        return EXIT_VALIDATION
    except stats_mod.ZeroVariance as exc:
        log.error("%s", exc)
        log.error(
            "the two metrics are identical on every sampled pair; "
            "compare different metrics or widen the sample"
        )
        return EXIT_RUNTIME
    except stats_mod.StatsError as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME
    except (teacher_mod.TeacherError, EmbeddingError) as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
