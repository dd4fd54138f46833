"""Scoring harness: micro-averaged precision/recall/F1 over factor sets and
question-level / lab-level accuracy over retrieved ranges, plus the
closed-loop driver that runs both stages against a configured system."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .datasets import FactorDatasetEntry, LabRecord, RangeQuestion, question_text_for
from .factors import canonical_factor_set
from .matching import match_answer
from .session import NoAnswer, NotInCorpus, Orchestrator, Stage


class MissingPrediction(Exception):
    def __init__(self, labs: list[str]):
        self.labs = labs
        super().__init__(f"no prediction for labs: {labs[:5]}{'…' if len(labs) > 5 else ''}")


class DuplicateQuestion(Exception):
    pass


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")

    def add(self, other: "ConfusionCounts") -> None:
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn


def score_factors(predictions: dict, truth: list[FactorDatasetEntry]):
    """Per-lab set comparison after canonicalization; micro aggregation sums
    the raw counts across labs."""
    missing = [e.lab_name for e in truth if e.lab_name not in predictions]
    if missing:
        raise MissingPrediction(missing)
    per_lab = []
    total = ConfusionCounts()
    for entry in truth:
        pred = canonical_factor_set(predictions[entry.lab_name])
        true = canonical_factor_set(entry.true_factors)
        counts = ConfusionCounts(tp=len(pred & true), fp=len(pred - true),
                                 fn=len(true - pred))
        per_lab.append((entry.lab_name, counts))
        total.add(counts)
    return total, per_lab


def f1_from_pr(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def micro_prf(counts: ConfusionCounts) -> tuple[float, float, float]:
    """Zero denominators yield 0 by convention."""
    p = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    r = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    return p, r, f1_from_pr(p, r)


def accuracy(results: list[tuple[str, str, bool]]) -> tuple[float, float]:
    """(question-level, lab-level) accuracy over (lab, question, correct) rows.

    Lab-level credit is fractional: a lab with 4 questions and 2 correct
    contributes 0.5 of a lab."""
    if not results:
        return 0.0, 0.0
    seen = set()
    by_lab: dict[str, list[bool]] = {}
    for lab, question, correct in results:
        key = (lab, question)
        if key in seen:
            raise DuplicateQuestion(f"{lab!r}: {question!r}")
        seen.add(key)
        by_lab.setdefault(lab, []).append(bool(correct))
    total = sum(len(v) for v in by_lab.values())
    qla = sum(sum(v) for v in by_lab.values()) / total
    lla = sum(sum(v) / len(v) for v in by_lab.values()) / len(by_lab)
    return qla, lla


@dataclass
class MetricReport:
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    qla: float = 0.0
    lla: float = 0.0
    per_lab: list = field(default_factory=list)
    provider_tag: str = ""
    timestamp: str = ""
    incomplete: bool = False
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "qla": self.qla,
            "lla": self.lla,
            "incomplete": self.incomplete,
            "provider_tag": self.provider_tag,
            "timestamp": self.timestamp,
            "failures": self.failures,
            "per_lab": self.per_lab,
        }

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, ensure_ascii=False)
            fh.write("\n")


def run_factor_eval(engine: Orchestrator, labs: list[LabRecord]) -> MetricReport:
    predictions: dict[str, frozenset] = {}
    report = MetricReport(provider_tag=engine.provider.kind,
                          timestamp=datetime.now(timezone.utc).isoformat())
    completed: list[FactorDatasetEntry] = []
    for lab in labs:
        try:
            session = engine.start_session(question_text_for(lab.lab_name, {}))
            predictions[lab.lab_name] = engine.retrieve_factors(session)
            completed.append(FactorDatasetEntry(lab.lab_name, frozenset(lab.factors)))
        except Exception as exc:
            report.failures.append({"lab": lab.lab_name, "error": str(exc)})
            report.incomplete = True
    counts, per_lab = score_factors(predictions, completed)
    report.precision, report.recall, report.f1 = micro_prf(counts)
    report.per_lab = [{"lab": name, "tp": c.tp, "fp": c.fp, "fn": c.fn}
                      for name, c in per_lab]
    return report


def run_question(engine: Orchestrator, question: RangeQuestion,
                 mode: str = "exact", references: list[str] | None = None):
    """Drive one full conversation for a dataset question. Returns
    (correct, session)."""
    session = engine.start_session(question_text_for(question.lab_name, {}))
    engine.retrieve_factors(session)
    if session.stage is Stage.AWAITING_FACTORS:
        answers = {}
        for fq in session.pending_questions:
            answers[fq.factor] = question.factor_values.get(fq.factor, "Not specified")
        engine.submit_answers(session, answers)
    elif session.stage is Stage.AWAITING_QUERY:
        # Empty factor set answers directly inside retrieve_factors; reaching
        # here means the answer step was skipped, so run it now.
        engine.retrieve_normal_range(session)
    correct = (session.stage is Stage.ANSWERED and
               match_answer(session.answer.text, question.true_answer,
                            references=references, mode=mode))
    return correct, session


def run_range_eval(engine: Orchestrator, labs: list[LabRecord],
                   mode: str = "exact",
                   references: dict[str, list[str]] | None = None) -> MetricReport:
    report = MetricReport(provider_tag=engine.provider.kind,
                          timestamp=datetime.now(timezone.utc).isoformat())
    rows: list[tuple[str, str, bool]] = []
    for lab in labs:
        lab_rows = []
        for q in lab.questions:
            refs = (references or {}).get(lab.lab_name)
            try:
                correct, _ = run_question(engine, q, mode=mode, references=refs)
            except (NoAnswer, NotInCorpus) as exc:
                correct = False
                report.failures.append({"lab": lab.lab_name,
                                        "question": q.question_text,
                                        "error": str(exc)})
            except Exception as exc:
                correct = False
                report.failures.append({"lab": lab.lab_name,
                                        "question": q.question_text,
                                        "error": str(exc)})
                report.incomplete = True
            lab_rows.append((lab.lab_name, q.question_text, correct))
        rows.extend(lab_rows)
        report.per_lab.append({
            "lab": lab.lab_name,
            "questions": len(lab_rows),
            "correct": sum(c for _, _, c in lab_rows),
        })
    report.qla, report.lla = accuracy(rows)
    return report


def run_eval(engine: Orchestrator, labs: list[LabRecord], mode: str = "exact",
             references: dict[str, list[str]] | None = None) -> MetricReport:
    """Both stages end-to-end; factor metrics and range accuracy in one report."""
    factor_report = run_factor_eval(engine, labs)
    range_report = run_range_eval(engine, labs, mode=mode, references=references)
    return MetricReport(
        precision=factor_report.precision,
        recall=factor_report.recall,
        f1=factor_report.f1,
        qla=range_report.qla,
        lla=range_report.lla,
        per_lab=[{"factors": factor_report.per_lab, "ranges": range_report.per_lab}],
        provider_tag=engine.provider.kind,
        timestamp=range_report.timestamp,
        incomplete=factor_report.incomplete or range_report.incomplete,
        failures=factor_report.failures + range_report.failures,
    )
