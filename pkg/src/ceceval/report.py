"""Per-instance scoring and per-model report assembly.

Score records use a fixed JSONL envelope so downstream comparisons never
recompute metrics:
  {"id", "model", "bleu", "rouge1", "rouge2", "rougeL", "meteor",
   "embf1", "cec_forward", "cec_backward", "cec_sym", "n", "m",
   "degenerate"}
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import lexical
from .cec import cec_instance
from .corpus import Corpus, Instance
from .embedder import ProviderConfig
from .hashutil import fnv1a_hex
from .textseg import Origin, segment, tokenize

log = logging.getLogger(__name__)

METRIC_KEYS = ["bleu", "rouge1", "rouge2", "rougeL", "meteor", "embf1", "cec"]
COLUMN_TITLES = {
    "bleu": "BLEU",
    "rouge1": "ROUGE-1",
    "rouge2": "ROUGE-2",
    "rougeL": "ROUGE-L",
    "meteor": "METEOR",
    "embf1": "EmbF1",
    "cec": "CEC",
}
# Declared score ranges, used by report self-checks.
METRIC_RANGES = {
    "bleu": (0.0, 1.0),
    "rouge1": (0.0, 1.0),
    "rouge2": (0.0, 1.0),
    "rougeL": (0.0, 1.0),
    "meteor": (0.0, 1.0),
    "embf1": (-1.0, 1.0),
    "cec": (-1.0, 1.0),
}


@dataclass
class ModelRow:
    model: str
    means: dict[str, float]
    sds: dict[str, float]


@dataclass
class MetricReport:
    rows: list[ModelRow]
    n_instances: int
    skipped: int
    provider_id: str
    config_digest: str
    partial: bool = False

    def to_json_dict(self) -> dict:
        return {
            "rows": [
                {"model": r.model, "means": r.means, "sds": r.sds} for r in self.rows
            ],
            "n_instances": self.n_instances,
            "skipped": self.skipped,
            "partial": self.partial,
            "provider_id": self.provider_id,
            "config_digest": self.config_digest,
        }

    def render(self, fmt: str) -> str:
        if fmt == "md":
            return self.render_markdown()
        if fmt == "csv":
            return self.render_csv()
        if fmt == "json":
            return json.dumps(self.to_json_dict(), indent=2) + "\n"
        raise ValueError(f"unknown report format {fmt!r}")

    def render_markdown(self) -> str:
        header = "| Model | " + " | ".join(COLUMN_TITLES[k] for k in METRIC_KEYS) + " |"
        divider = "|" + "---|" * (len(METRIC_KEYS) + 1)
        lines = [header, divider]
        for row in self.rows:
            cells = [f"{row.means[k]:.4f} ± {row.sds[k]:.4f}" for k in METRIC_KEYS]
            lines.append("| " + row.model + " | " + " | ".join(cells) + " |")
        lines.append("")
        lines.append(
            f"instances: {self.n_instances}  skipped: {self.skipped}  "
            f"provider: {self.provider_id}  config: {self.config_digest}"
        )
        if self.partial:
            lines.append("partial: degenerate instances were excluded from all rows")
        return "\n".join(lines) + "\n"

    def render_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        header = ["model"]
        for key in METRIC_KEYS:
            header.extend([key, f"{key}_sd"])
        header.extend(["n_instances", "skipped", "partial", "provider_id", "config_digest"])
        writer.writerow(header)
        for row in self.rows:
            record = [row.model]
            for key in METRIC_KEYS:
                record.extend([f"{row.means[key]:.6f}", f"{row.sds[key]:.6f}"])
            record.extend(
                [
                    str(self.n_instances),
                    str(self.skipped),
                    str(self.partial).lower(),
                    self.provider_id,
                    self.config_digest,
                ]
            )
            writer.writerow(record)
        return buffer.getvalue()


def config_digest(settings: dict) -> str:
    """Stable 16-hex digest of the run configuration embedded in reports."""
    return fnv1a_hex(json.dumps(settings, sort_keys=True, ensure_ascii=False))


def score_instance(
    instance: Instance,
    model: str,
    provider: ProviderConfig,
    abbreviations: frozenset[str] | None = None,
) -> dict:
    """All seven metrics for one (instance, model) pair as a JSONL record."""
    generation = instance.generations[model]
    reference = instance.reference_explanation or ""
    gen_tokens = tokenize(generation)
    ref_tokens = tokenize(reference)

    record = {
        "id": instance.id,
        "model": model,
        "bleu": lexical.bleu(gen_tokens, ref_tokens),
        "rouge1": lexical.rouge1(gen_tokens, ref_tokens),
        "rouge2": lexical.rouge2(gen_tokens, ref_tokens),
        "rougeL": lexical.rougeL(gen_tokens, ref_tokens),
        "meteor": lexical.meteor(gen_tokens, ref_tokens),
        "embf1": lexical.embf1(gen_tokens, ref_tokens, provider),
    }

    gen_sentences = segment(generation, Origin.GENERATED, abbreviations)
    ref_sentences = segment(reference, Origin.REFERENCE, abbreviations)
    if len(gen_sentences) == 0 and len(ref_sentences) == 0:
        record.update(
            cec_forward=0.0, cec_backward=0.0, cec_sym=0.0, n=0, m=0, degenerate=True
        )
        return record
    result = cec_instance(gen_sentences, ref_sentences, provider)
    record.update(
        cec_forward=result.forward,
        cec_backward=result.backward,
        cec_sym=result.symmetric,
        n=result.n,
        m=result.m,
        degenerate=result.degenerate,
    )
    return record


def _mean_sd(values: list[float]) -> tuple[float, float]:
    mean = math.fsum(values) / len(values)
    if len(values) < 2:
        return mean, 0.0
    variance = math.fsum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return mean, math.sqrt(variance)


def score_corpus(
    corpus: Corpus,
    models: list[str],
    provider: ProviderConfig,
    settings: dict | None = None,
    jobs: int = 1,
    abbreviations: frozenset[str] | None = None,
) -> tuple[MetricReport, list[dict]]:
    """Score every model over the shared eligible instance set.

    Eligibility requires a reference and a generation for every requested
    model; instances degenerate under any model are dropped from the
    aggregates of all models so rows stay comparable.
    """
    eligible = [
        inst
        for inst in corpus
        if inst.reference_explanation and all(m in inst.generations for m in models)
    ]
    ineligible = len(corpus) - len(eligible)
    if ineligible:
        log.warning(
            "%d instance(s) lack a reference or a generation and were excluded",
            ineligible,
        )

    def score_one(instance: Instance) -> list[dict]:
        return [
            score_instance(instance, model, provider, abbreviations)
            for model in models
        ]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_instance = list(pool.map(score_one, eligible))
    else:
        per_instance = [score_one(inst) for inst in eligible]

    degenerate_ids = {
        records[0]["id"]
        for records in per_instance
        if any(r["degenerate"] for r in records)
    }
    kept = [
        records for records in per_instance if records[0]["id"] not in degenerate_ids
    ]

    rows = []
    for position, model in enumerate(models):
        means: dict[str, float] = {}
        sds: dict[str, float] = {}
        model_records = [records[position] for records in kept]
        if not model_records:
            raise ValueError("no scorable instances; corpus is empty or all degenerate")
        for key in METRIC_KEYS:
            source = "cec_sym" if key == "cec" else key
            means[key], sds[key] = _mean_sd([r[source] for r in model_records])
        rows.append(ModelRow(model=model, means=means, sds=sds))

    records_flat = [record for records in per_instance for record in records]
    report = MetricReport(
        rows=rows,
        n_instances=len(kept),
        skipped=len(degenerate_ids),
        provider_id=provider.provider_id,
        config_digest=config_digest(settings or {}),
        partial=bool(degenerate_ids),
    )
    return report, records_flat
