"""Answer-string matching with numeric-range canonicalization.

"4.7 to 6.1", "4.7-6.1" and "4.7–6.1" are the same range; units are compared
verbatim (case-insensitively). Non-parseable strings fall back to normalized
string equality."""

from __future__ import annotations

import re

_DASHES = str.maketrans({"–": "-", "—": "-", "−": "-"})
_NUM = r"\d+(?:\.\d+)?"
_RANGE_RE = re.compile(rf"({_NUM})\s*(?:\bto\b|-)\s*({_NUM})")
_THOUSANDS_RE = re.compile(r"(\d),(?=\d{3}\b)")


def normalize_answer(text: str) -> str:
    t = text.strip().lower().translate(_DASHES)
    while _THOUSANDS_RE.search(t):
        t = _THOUSANDS_RE.sub(r"\1", t)
    t = _RANGE_RE.sub(r"\1-\2", t)
    t = re.sub(r"\s+", " ", t)
    return t.strip(" .")


def match_answer(predicted: str, truth: str, references: list[str] | None = None,
                 mode: str = "exact") -> bool:
    if not truth:
        raise ValueError("truth must be non-empty")
    if mode not in ("exact", "any-reference"):
        raise ValueError(f"unknown mode {mode!r}")
    candidates = [truth]
    if mode == "any-reference":
        candidates.extend(references or [])
    p = normalize_answer(predicted)
    return any(p == normalize_answer(c) for c in candidates)
