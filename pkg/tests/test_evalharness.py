import json

import pytest

from labrag import evalharness as ev
from labrag.datasets import all_questions
from labrag.providers import OracleProvider, ReplayProvider, prompt_digest
from labrag.session import Orchestrator, Stage
from tests.conftest import fixed_clock


class TestFactorEval:
    def test_oracle_is_perfect(self, engine, labs):
        report = ev.run_factor_eval(engine, labs)
        assert (report.precision, report.recall, report.f1) == (1.0, 1.0, 1.0)
        assert len(report.per_lab) == 122
        assert not report.failures
        assert not report.incomplete

    def test_per_lab_counts(self, engine, labs):
        report = ev.run_factor_eval(engine, labs)
        by_lab = {row["lab"]: row for row in report.per_lab}
        esr = by_lab["Erythrocyte sedimentation rate (ESR)"]
        assert (esr["tp"], esr["fp"], esr["fn"]) == (2, 0, 0)
        ald = by_lab["Aldolase blood test"]
        assert (ald["tp"], ald["fp"], ald["fn"]) == (0, 0, 0)


class TestRangeEval:
    def test_oracle_is_perfect(self, engine, labs):
        report = ev.run_range_eval(engine, labs)
        assert report.qla == 1.0
        assert report.lla == 1.0
        assert sum(r["questions"] for r in report.per_lab) == 212
        assert not report.failures

    def test_single_question(self, engine, labs):
        esr = next(l for l in labs
                   if l.lab_name == "Erythrocyte sedimentation rate (ESR)")
        q = esr.questions[0]
        correct, session = ev.run_question(engine, q)
        assert correct
        assert session.stage is Stage.ANSWERED
        assert session.answer.text == q.true_answer

    def test_tampered_range_counts_as_failure(self, engine, labs, tmp_path,
                                              fixture_index, embed_cfg):
        # Record the full oracle run, then corrupt one range response and
        # replay strictly: exactly one question flips to incorrect.
        transcript = tmp_path / "t.jsonl"
        recorder = Orchestrator(fixture_index, embed_cfg,
                                ReplayProvider(transcript,
                                               inner=OracleProvider(labs)),
                                clock=fixed_clock)
        assert ev.run_range_eval(recorder, labs).qla == 1.0

        target = next(q for q in all_questions(labs)
                      if q.lab_name == "Acid-fast stain")
        lines = transcript.read_text().splitlines()
        tampered = []
        for line in lines:
            rec = json.loads(line)
            if rec["response"] == target.true_answer:
                rec["response"] = "N/A"
            tampered.append(json.dumps(rec))
        transcript.write_text("\n".join(tampered) + "\n")

        strict = Orchestrator(fixture_index, embed_cfg,
                              ReplayProvider(transcript), clock=fixed_clock)
        report = ev.run_range_eval(strict, labs)
        assert report.qla == pytest.approx(211 / 212)
        assert report.lla == pytest.approx(121 / 122)
        assert not report.incomplete  # NoAnswer is a scored miss, not a crash
        assert any(f["lab"] == "Acid-fast stain" for f in report.failures)


class TestCombined:
    def test_run_eval(self, engine, labs):
        report = ev.run_eval(engine, labs)
        assert report.f1 == 1.0
        assert report.qla == 1.0
        assert report.lla == 1.0
        assert report.provider_tag == "oracle"
        assert not report.incomplete

    def test_report_round_trips_as_json(self, engine, labs, tmp_path):
        report = ev.run_factor_eval(engine, labs)
        path = tmp_path / "report.json"
        report.write(path)
        loaded = json.loads(path.read_text())
        assert loaded == report.to_dict()
        assert list(loaded)[:5] == ["precision", "recall", "f1", "qla", "lla"]
