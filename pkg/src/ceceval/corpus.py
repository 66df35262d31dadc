"""Claim-evidence-explanation data model and JSONL corpus ingest.

One record per line. Field names are part of the wire contract:
``id``, ``claim``, ``evidence``, ``label``, ``reference_explanation``
(optional), ``generations`` (optional model-name -> text map).
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterator, Sequence

from .hashutil import seeded_shuffle

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# Soft cap on evidence entries; longer lists are accepted with a warning
# because external corpora are not uniformly truncated.
EVIDENCE_SOFT_CAP = 5


class CorpusError(Exception):
    """Base class for corpus ingest and sampling failures."""


class MalformedLine(CorpusError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: not valid JSON ({reason})")
        self.line_no = line_no


class SchemaViolation(CorpusError):
    def __init__(self, line_no: int, field_name: str, reason: str):
        super().__init__(f"line {line_no}: field {field_name!r}: {reason}")
        self.line_no = line_no
        self.field = field_name


class DuplicateId(CorpusError):
    def __init__(self, instance_id: str, line_no: int | None = None):
        where = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"duplicate instance id {instance_id!r}{where}")
        self.instance_id = instance_id


class InsufficientInstances(CorpusError):
    def __init__(self, requested: int, available: int):
        super().__init__(
            f"requested {requested} instances but only {available} are eligible"
        )
        self.requested = requested
        self.available = available


class Label(Enum):
    SUPPORTED = "supported"
    REFUTED = "refuted"
    NOT_ENOUGH_INFO = "not enough info"

    @classmethod
    def parse(cls, raw: str) -> "Label":
        """Case-insensitive parse of the three canonical label strings."""
        lowered = raw.strip().lower()
        for member in cls:
            if member.value == lowered:
                return member
        raise ValueError(f"unknown label {raw!r}")


@dataclass
class Instance:
    """One claim with its evidence, verdict, and explanations."""

    id: str
    claim: str
    evidence: list[str]
    label: Label
    reference_explanation: str | None = None
    generations: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("instance id must be nonempty")
        if not self.evidence:
            raise ValueError(f"instance {self.id!r}: evidence list is empty")
        for entry in self.evidence:
            if not entry.strip():
                raise ValueError(f"instance {self.id!r}: empty evidence entry")

    def to_json_dict(self) -> dict:
        record: dict = {
            "id": self.id,
            "claim": self.claim,
            "evidence": list(self.evidence),
            "label": self.label.value,
        }
        if self.reference_explanation is not None:
            record["reference_explanation"] = self.reference_explanation
        if self.generations:
            record["generations"] = dict(self.generations)
        return record

    def with_reference(self, text: str) -> "Instance":
        return replace(self, reference_explanation=text)


@dataclass
class Corpus:
    """Ordered, id-unique collection of instances.

    ``source_path`` is provenance only and excluded from equality so a
    save/load round trip compares equal.
    """

    instances: list[Instance]
    source_path: str = field(default="", compare=False)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for inst in self.instances:
            if inst.id in seen:
                raise DuplicateId(inst.id)
            seen.add(inst.id)

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self) -> Iterator[Instance]:
        return iter(self.instances)

    def ids(self) -> list[str]:
        return [inst.id for inst in self.instances]


@dataclass
class ValidationSummary:
    """Counts of incomplete instances; reporting only, never raises."""

    n_instances: int
    missing_reference: int
    missing_generation: dict[str, int]
    warnings: list[str] = field(default_factory=list)


def _parse_record(record: object, line_no: int) -> Instance:
    if not isinstance(record, dict):
        raise SchemaViolation(line_no, "record", "expected a JSON object")

    def required(name: str, types: type | tuple) -> object:
        if name not in record:
            raise SchemaViolation(line_no, name, "missing required field")
        value = record[name]
        if not isinstance(value, types):
            raise SchemaViolation(line_no, name, f"expected {types}, got {type(value).__name__}")
        return value

    instance_id = required("id", str)
    claim = required("claim", str)
    evidence = required("evidence", list)
    raw_label = required("label", str)

    if not instance_id:
        raise SchemaViolation(line_no, "id", "must be nonempty")
    if not evidence:
        raise SchemaViolation(line_no, "evidence", "must be a nonempty list")
    for k, entry in enumerate(evidence):
        if not isinstance(entry, str) or not entry.strip():
            raise SchemaViolation(line_no, "evidence", f"entry {k} empty or not a string")
    if len(evidence) > EVIDENCE_SOFT_CAP:
        log.warning(
            "line %d: instance %r has %d evidence entries (> %d)",
            line_no, instance_id, len(evidence), EVIDENCE_SOFT_CAP,
        )

    try:
        label = Label.parse(raw_label)
    except ValueError as exc:
        raise SchemaViolation(line_no, "label", str(exc)) from None

    reference = record.get("reference_explanation")
    if reference is not None and not isinstance(reference, str):
        raise SchemaViolation(line_no, "reference_explanation", "expected a string")

    generations = record.get("generations") or {}
    if not isinstance(generations, dict):
        raise SchemaViolation(line_no, "generations", "expected an object")
    for model, text in generations.items():
        if not isinstance(text, str):
            raise SchemaViolation(line_no, "generations", f"value for {model!r} not a string")

    return Instance(
        id=instance_id,
        claim=claim,
        evidence=list(evidence),
        label=label,
        reference_explanation=reference,
        generations=dict(generations),
    )


def load_corpus(path: str | Path) -> Corpus:
    """Parse a UTF-8 JSONL file into a Corpus, preserving line order."""
    instances: list[Instance] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(line_no, exc.msg) from None
            inst = _parse_record(record, line_no)
            if inst.id in seen:
                raise DuplicateId(inst.id, line_no)
            seen.add(inst.id)
            instances.append(inst)
    return Corpus(instances, source_path=str(path))


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write canonical JSONL atomically (temp file + rename)."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for inst in corpus:
                fh.write(json.dumps(inst.to_json_dict(), ensure_ascii=False))
                fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def validate_corpus(
    corpus: Corpus,
    require_reference: bool = False,
    require_models: Sequence[str] = (),
) -> ValidationSummary:
    """Count incomplete instances without mutating anything."""
    missing_reference = sum(
        1 for inst in corpus if not inst.reference_explanation
    )
    missing_generation = {
        model: sum(1 for inst in corpus if model not in inst.generations)
        for model in require_models
    }
    warnings = []
    if len(corpus) == 0:
        warnings.append("corpus is empty")
    if require_reference and missing_reference:
        warnings.append(f"{missing_reference} instance(s) missing reference_explanation")
    for model, count in missing_generation.items():
        if count:
            warnings.append(f"{count} instance(s) missing generation for {model!r}")
    return ValidationSummary(
        n_instances=len(corpus),
        missing_reference=missing_reference,
        missing_generation=missing_generation,
        warnings=warnings,
    )


def eligible_instances(
    source: Corpus | Sequence[Instance],
    model: str | None = None,
    require_reference: bool = True,
) -> list[Instance]:
    """Instances usable for reference-based scoring of ``model``."""
    out = []
    for inst in source:
        if require_reference and not inst.reference_explanation:
            continue
        if model is not None and model not in inst.generations:
            continue
        out.append(inst)
    return out


def sample_pairs(
    source: Corpus | Sequence[Instance],
    n: int,
    seed: int,
    model: str | None = None,
    require_reference: bool = True,
) -> list[Instance]:
    """Draw ``n`` distinct eligible instances with a seeded shuffle.

    The draw is the first ``n`` elements of a SplitMix64 Fisher-Yates
    shuffle over the eligible instances in corpus order, so the same
    (corpus, n, seed) always yields the same sample.
    """
    eligible = eligible_instances(source, model=model, require_reference=require_reference)
    if n > len(eligible):
        raise InsufficientInstances(n, len(eligible))
    return seeded_shuffle(eligible, seed)[:n]
