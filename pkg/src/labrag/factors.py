"""Canonical factor vocabulary, response parsing, and follow-up question
construction."""

from __future__ import annotations

import re
from dataclasses import dataclass

# Controlled vocabulary; free-form factor names are allowed beyond these.
CANONICAL_VOCAB = (
    "Sex",
    "Age",
    "Pregnancy status",
    "Menstrual cycle phase",
    "Specimen type",
)

# Alias -> canonical, keyed lowercase. Includes the canonical names themselves
# so canonicalization is idempotent by construction.
ALIASES = {
    "gender": "Sex",
    "sexes": "Sex",
    "age group": "Age",
    "age range": "Age",
    "pregnancy": "Pregnancy status",
    "pregnant": "Pregnancy status",
    "menstrual phase": "Menstrual cycle phase",
    "cycle phase": "Menstrual cycle phase",
    "menstrual cycle": "Menstrual cycle phase",
    "specimen": "Specimen type",
    "sample type": "Specimen type",
}
ALIASES.update({name.lower(): name for name in CANONICAL_VOCAB})

# Fixed choice tables; factors not listed here get choices mined from the
# retrieved document (Age thresholds) or fall back to free text.
CHOICE_TABLE = {
    "Sex": ("Male", "Female"),
    "Pregnancy status": ("Pregnant", "Not pregnant"),
}


class UnparseableResponse(Exception):
    """Model output is neither "None" nor a comma-separated factor list."""


def canonicalize(name: str) -> str:
    cleaned = re.sub(r"\s+", " ", name).strip().strip(".")
    if not cleaned:
        raise ValueError("empty factor name")
    hit = ALIASES.get(cleaned.lower())
    if hit:
        return hit
    # str.capitalize titlecases ligatures/digraphs, so repeat applications agree
    return cleaned.capitalize()


def canonical_factor_set(names) -> frozenset[str]:
    return frozenset(canonicalize(n) for n in names)


def factor_order(factors) -> list[str]:
    """Deterministic presentation order for a factor set."""
    return sorted(factors)


def parse_factor_response(text: str) -> frozenset[str]:
    """Parse a model response into a canonical factor set ("None" -> empty)."""
    cleaned = text.strip().strip(".")
    if not cleaned:
        raise UnparseableResponse("empty response")
    if cleaned.lower() == "none":
        return frozenset()
    parts = [p for p in (s.strip() for s in cleaned.split(",")) if p]
    if not parts:
        raise UnparseableResponse(f"no factors in response {text!r}")
    try:
        return canonical_factor_set(parts)
    except ValueError as exc:
        raise UnparseableResponse(f"bad factor in response {text!r}") from exc


@dataclass(frozen=True)
class FactorQuestion:
    factor: str
    choices: tuple[str, ...]
    allows_free_text: bool = False

    def __post_init__(self):
        if len(set(c.lower() for c in self.choices)) != len(self.choices):
            raise ValueError("duplicate choices")
        if not self.allows_free_text and len(self.choices) < 2:
            raise ValueError("fixed-choice question needs at least 2 choices")

    def accepts(self, value: str) -> bool:
        if self.allows_free_text:
            return bool(value.strip())
        return value.strip().lower() in {c.lower() for c in self.choices}


_THRESHOLD_RE = re.compile(
    r"\b(over \d+|under \d+|\d+(?:\.\d+)? to \d+(?:\.\d+)? years)\b",
    re.IGNORECASE,
)


def mine_age_choices(doc_text: str) -> tuple[str, ...]:
    """Age thresholds mentioned in a document ("over 50", "under 50",
    "1 to 5 years"), deduplicated in order of appearance."""
    seen = []
    for m in _THRESHOLD_RE.finditer(doc_text):
        phrase = m.group(1).lower()
        if phrase not in seen:
            seen.append(phrase)
    return tuple(seen)


def make_factor_questions(factors, lab: str, doc_text: str = "") -> list[FactorQuestion]:
    """One follow-up question per factor, in canonical order.

    Sex and pregnancy use fixed tables; Age choices are mined from the
    retrieved document when threshold phrases exist; everything else is
    free text.
    """
    questions = []
    for factor in factor_order(factors):
        if factor in CHOICE_TABLE:
            questions.append(FactorQuestion(factor=factor, choices=CHOICE_TABLE[factor]))
        elif factor == "Age":
            mined = mine_age_choices(doc_text)
            if len(mined) >= 2:
                questions.append(FactorQuestion(factor=factor, choices=mined))
            else:
                questions.append(FactorQuestion(factor=factor, choices=(), allows_free_text=True))
        else:
            questions.append(FactorQuestion(factor=factor, choices=(), allows_free_text=True))
    return questions
