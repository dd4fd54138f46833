"""Ground-truth dataset loading and question expansion.

The shipped fixture (`data/labs.jsonl`) is one JSON record per lab test:
{lab_name, factors[], questions[{factor_values, question_text, true_answer}], url}.
Factor value domains are derived from the questions, so the file stays the
single source of truth.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from importlib import resources

from .corpus import Corpus, LabDocument
from .factors import canonical_factor_set, factor_order


class MissingDomain(Exception):
    pass


class DatasetError(Exception):
    pass


@dataclass(frozen=True)
class RangeQuestion:
    lab_name: str
    factor_values: dict
    question_text: str
    true_answer: str

    def __post_init__(self):
        object.__setattr__(self, "factor_values", dict(self.factor_values))


@dataclass(frozen=True)
class FactorDatasetEntry:
    lab_name: str
    true_factors: frozenset


@dataclass(frozen=True)
class LabRecord:
    lab_name: str
    factors: tuple[str, ...]  # canonical order
    questions: tuple[RangeQuestion, ...]
    url: str

    def value_domains(self) -> dict:
        """Per-factor value lists, in first-appearance order across questions."""
        domains: dict[str, list[str]] = {f: [] for f in self.factors}
        for q in self.questions:
            for f, v in q.factor_values.items():
                if v not in domains.setdefault(f, []):
                    domains[f].append(v)
        return domains


def question_text_for(lab_name: str, factor_values: dict) -> str:
    if not factor_values:
        return f"What is the normal range of {lab_name}?"
    values = ", ".join(factor_values[f].lower() for f in factor_order(factor_values))
    return f"What is the normal range of {lab_name} for {values}?"


def expand_questions(lab_name: str, factors, value_domains: dict,
                     answers: dict | None = None) -> list[RangeQuestion]:
    """All factor-value combinations for one lab; factorless labs get exactly
    one question. `answers` maps a tuple of values (in canonical factor
    order) to the ground-truth range string."""
    ordered = factor_order(factors)
    for f in ordered:
        if f not in value_domains:
            raise MissingDomain(f"{lab_name}: no value domain for factor {f!r}")
    combos = itertools.product(*(value_domains[f] for f in ordered)) if ordered else [()]
    out = []
    for combo in combos:
        fv = dict(zip(ordered, combo))
        answer = (answers or {}).get(tuple(combo), "")
        out.append(RangeQuestion(
            lab_name=lab_name, factor_values=fv,
            question_text=question_text_for(lab_name, fv),
            true_answer=answer))
    return out


def load_labs(path=None) -> list[LabRecord]:
    if path is None:
        text = resources.files("labrag").joinpath("data/labs.jsonl").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    labs: list[LabRecord] = []
    seen: set[str] = set()
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"line {n}: invalid json: {exc}") from exc
        try:
            name = rec["lab_name"]
            factors = tuple(factor_order(canonical_factor_set(rec["factors"])))
            questions = tuple(
                RangeQuestion(lab_name=name,
                              factor_values=q["factor_values"],
                              question_text=q["question_text"],
                              true_answer=q["true_answer"])
                for q in rec["questions"])
            url = rec["url"]
        except KeyError as exc:
            raise DatasetError(f"line {n}: missing field {exc}") from exc
        if name in seen:
            raise DatasetError(f"line {n}: duplicate lab {name!r}")
        seen.add(name)
        if not questions:
            raise DatasetError(f"line {n}: lab {name!r} has no questions")
        labs.append(LabRecord(lab_name=name, factors=factors, questions=questions, url=url))
    return labs


def factor_dataset(labs: list[LabRecord]) -> list[FactorDatasetEntry]:
    return [FactorDatasetEntry(lab_name=lab.lab_name,
                               true_factors=frozenset(lab.factors))
            for lab in labs]


def all_questions(labs: list[LabRecord]) -> list[RangeQuestion]:
    return [q for lab in labs for q in lab.questions]


def corpus_from_labs(labs: list[LabRecord], source_tag: str = "fixture") -> Corpus:
    """Document per lab: the per-combination range statements joined '; '."""
    docs = []
    for lab in labs:
        if lab.factors:
            analyte = " ".join(
                w for w in lab.lab_name.lower().split()
                if w not in {"blood", "urine", "test", "count", "level", "-"})
            label_name = analyte or lab.lab_name.lower()
            intro = (f"Normal {label_name} results vary by "
                     f"{', '.join(f.lower() for f in lab.factors)}. "
                     f"The {label_name} ranges below list each {label_name} group.")
            parts = []
            for q in lab.questions:
                label = ", ".join(q.factor_values[f] for f in factor_order(q.factor_values))
                parts.append(f"{label}: {q.true_answer}")
            body = intro + " " + "; ".join(parts)
        else:
            body = lab.questions[0].true_answer
        docs.append(LabDocument(lab_name=lab.lab_name, normal_results=body, url=lab.url))
    return Corpus(documents=tuple(docs), source_tag=source_tag)
