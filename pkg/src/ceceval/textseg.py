"""Rule-based sentence segmentation and word tokenization.

A sentence boundary is a run of terminal punctuation (``.``, ``!``, ``?``)
followed by whitespace and an uppercase letter, or by the end of the
input. A versioned abbreviation list ("Dr.", "e.g.", ...) suppresses
boundaries after known abbreviations; decimal numbers never qualify
because the period inside them is not followed by whitespace. The rules
are deliberately dumb and fixed: sentence counts feed alignment scores,
so they must be identical across machines and runs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterator


class Origin(Enum):
    GENERATED = "generated"
    REFERENCE = "reference"


@dataclass
class SentenceSet:
    """Ordered sentences of one explanation, tagged with their origin."""

    sentences: list[str]
    origin: Origin = Origin.GENERATED

    def __post_init__(self) -> None:
        for s in self.sentences:
            if not s.strip():
                raise ValueError("sentence is empty after trimming")

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[str]:
        return iter(self.sentences)


@dataclass
class TokenSequence:
    """Lowercase word tokens in input order."""

    tokens: list[str]

    def __post_init__(self) -> None:
        for t in self.tokens:
            if not t or any(c.isspace() for c in t):
                raise ValueError(f"invalid token: {t!r}")

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)


_TERMINALS = ".!?"
# Maximal runs of Unicode alphanumerics; underscore and all punctuation split.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
# Opening punctuation stripped before abbreviation lookup: "(e.g." -> "e.g."
_OPENERS = "([{\"'“‘"


def load_abbreviations(path: str | Path) -> frozenset[str]:
    """Read one abbreviation per line (lowercased); '#' lines are comments."""
    abbrevs = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            token = line.strip()
            if token and not token.startswith("#"):
                abbrevs.add(token.lower())
    return frozenset(abbrevs)


def _default_abbreviations() -> frozenset[str]:
    data = resources.files("ceceval").joinpath("data/abbreviations.txt")
    abbrevs = set()
    for line in data.read_text(encoding="utf-8").splitlines():
        token = line.strip()
        if token and not token.startswith("#"):
            abbrevs.add(token.lower())
    return frozenset(abbrevs)


DEFAULT_ABBREVIATIONS: frozenset[str] = _default_abbreviations()


def _is_abbreviation(text: str, period_idx: int, abbrevs: frozenset[str]) -> bool:
    """True when the word ending at ``period_idx`` is a known abbreviation."""
    start = period_idx
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    word = text[start : period_idx + 1].lstrip(_OPENERS)
    return word.lower() in abbrevs


def segment(
    text: str,
    origin: Origin = Origin.GENERATED,
    abbreviations: frozenset[str] | None = None,
) -> SentenceSet:
    """Split ``text`` into sentences; empty or whitespace-only input -> [].

    Every non-whitespace character of the input survives into exactly one
    sentence; only inter-sentence whitespace is dropped.
    """
    abbrevs = DEFAULT_ABBREVIATIONS if abbreviations is None else abbreviations
    if not text or not text.strip():
        return SentenceSet([], origin)

    cuts: list[tuple[int, int]] = []  # (sentence end, next sentence start)
    i = 0
    length = len(text)
    while i < length:
        if text[i] not in _TERMINALS:
            i += 1
            continue
        run_start = i
        run_end = i
        while run_end + 1 < length and text[run_end + 1] in _TERMINALS:
            run_end += 1
        after = run_end + 1
        if after < length and text[after].isspace():
            nxt = after
            while nxt < length and text[nxt].isspace():
                nxt += 1
            if nxt < length and text[nxt].isupper():
                # A lone period after an abbreviation does not end a sentence.
                lone_period = run_start == run_end and text[run_start] == "."
                if not (lone_period and _is_abbreviation(text, run_start, abbrevs)):
                    cuts.append((after, nxt))
        i = run_end + 1

    sentences = []
    start = 0
    for end, nxt in cuts:
        chunk = text[start:end].strip()
        if chunk:
            sentences.append(chunk)
        start = nxt
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return SentenceSet(sentences, origin)


def tokenize(text: str) -> TokenSequence:
    """Lowercased alphanumeric tokens; digits survive, punctuation splits."""
    if not text:
        return TokenSequence([])
    return TokenSequence([m.group(0).lower() for m in _TOKEN_RE.finditer(text)])
