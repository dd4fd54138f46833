import json

import httpx
import pytest

from labrag import providers as pv
from labrag.datasets import question_text_for


def factor_prompt(lab_name):
    return ("Some context here.\n"
            "Question: Erythrocyte sedimentation rate\nAnswer: Age, Sex\n\n"
            f"Question: {lab_name}\nAnswer:")


def range_prompt(lab_name, factor_values):
    lines = [f"- {f}: {v}" for f, v in sorted(factor_values.items())] or ["(none)"]
    return (f"Context: {lab_name}: some retrieved text\n"
            + "\n".join(lines)
            + f"\nQuestion: {question_text_for(lab_name, factor_values)}\nAnswer:")


class TestOracle:
    def test_factorless(self, labs):
        oracle = pv.OracleProvider(labs)
        got = oracle.complete(factor_prompt("Aldolase blood test"), task=pv.TASK_FACTORS)
        assert got == "None"

    def test_two_factor_sorted(self, labs):
        oracle = pv.OracleProvider(labs)
        got = oracle.complete(factor_prompt("Erythrocyte sedimentation rate (ESR)"),
                              task=pv.TASK_FACTORS)
        assert got == "Age, Sex"

    def test_matches_last_question_only(self, labs):
        # few-shot examples earlier in the prompt must not hijack the match
        oracle = pv.OracleProvider(labs)
        got = oracle.complete(factor_prompt("Aldolase blood test"), task=pv.TASK_FACTORS)
        assert got != "Age, Sex"

    def test_longest_name_wins(self, labs):
        oracle = pv.OracleProvider(labs)
        by_name = {l.lab_name: l for l in labs}
        assert "Testosterone blood test" in by_name and "Free testosterone blood test" in by_name
        free = by_name["Free testosterone blood test"]
        got = oracle.complete(factor_prompt("Free testosterone blood test"), task=pv.TASK_FACTORS)
        want = ", ".join(sorted(free.factors)) if free.factors else "None"
        assert got == want

    def test_range_answer_matches_dataset(self, labs):
        oracle = pv.OracleProvider(labs)
        lab = next(l for l in labs if l.lab_name == "Red blood cell (RBC) count")
        q = next(q for q in lab.questions if q.factor_values == {"Sex": "Male"})
        got = oracle.complete(range_prompt(lab.lab_name, q.factor_values),
                              task=pv.TASK_RANGE)
        assert got == q.true_answer == "4.7 to 6.1 million cells/mcL"

    def test_range_value_case_insensitive(self, labs):
        oracle = pv.OracleProvider(labs)
        got = oracle.complete(range_prompt("Red blood cell (RBC) count", {"Sex": "male"}),
                              task=pv.TASK_RANGE)
        assert got == "4.7 to 6.1 million cells/mcL"

    def test_unknown_lab(self, labs):
        oracle = pv.OracleProvider(labs)
        with pytest.raises(pv.UnknownLab):
            oracle.complete(factor_prompt("Midichlorian count"), task=pv.TASK_FACTORS)

    def test_unmatched_factor_values(self, labs):
        oracle = pv.OracleProvider(labs)
        with pytest.raises(pv.UnknownLab):
            oracle.complete(range_prompt("Red blood cell (RBC) count", {"Sex": "Other"}),
                            task=pv.TASK_RANGE)


class TestReplay:
    def test_strict_miss(self, tmp_path):
        rp = pv.ReplayProvider(tmp_path / "t.jsonl")
        with pytest.raises(pv.MissingRecording):
            rp.complete("never seen", task=pv.TASK_RANGE)

    def test_record_then_strict_replay(self, tmp_path, labs):
        path = tmp_path / "t.jsonl"
        prompt = factor_prompt("Aldolase blood test")
        recorder = pv.ReplayProvider(path, inner=pv.OracleProvider(labs))
        assert recorder.complete(prompt, task=pv.TASK_FACTORS) == "None"

        strict = pv.ReplayProvider(path)
        assert strict.complete(prompt, task=pv.TASK_FACTORS) == "None"

    def test_transcript_is_keyed_by_digest(self, tmp_path, labs):
        path = tmp_path / "t.jsonl"
        prompt = factor_prompt("Aldolase blood test")
        pv.ReplayProvider(path, inner=pv.OracleProvider(labs)).complete(
            prompt, task=pv.TASK_FACTORS)
        rec = json.loads(path.read_text().splitlines()[0])
        assert rec == {"prompt_sha256": pv.prompt_digest(prompt), "response": "None"}

    def test_tampered_response_is_served_verbatim(self, tmp_path):
        path = tmp_path / "t.jsonl"
        path.write_text(json.dumps(
            {"prompt_sha256": pv.prompt_digest("p"), "response": "N/A"}) + "\n")
        assert pv.ReplayProvider(path).complete("p") == "N/A"

    def test_record_mode_does_not_duplicate(self, tmp_path, labs):
        path = tmp_path / "t.jsonl"
        recorder = pv.ReplayProvider(path, inner=pv.OracleProvider(labs))
        prompt = factor_prompt("Aldolase blood test")
        recorder.complete(prompt, task=pv.TASK_FACTORS)
        recorder.complete(prompt, task=pv.TASK_FACTORS)
        assert len(path.read_text().splitlines()) == 1


def chat_cfg(url="https://chat.test/v1/chat"):
    return pv.LlmProviderConfig(kind="remote-chat", endpoint_url=url)


def fake_client(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


class TestRemoteChat:
    def test_request_shape(self, monkeypatch):
        monkeypatch.setenv("CHAT_API_KEY", "sk-chat")
        seen = {}

        def handler(request):
            seen["auth"] = request.headers["Authorization"]
            seen["body"] = json.loads(request.content)
            return httpx.Response(200, json={
                "choices": [{"message": {"content": "Age, Sex"}}]})

        out = pv.RemoteChatProvider(chat_cfg(), client=fake_client(handler)) \
            .complete("the prompt", task=pv.TASK_FACTORS)
        assert out == "Age, Sex"
        assert seen["auth"] == "Bearer sk-chat"
        assert seen["body"]["temperature"] == 0.0
        assert seen["body"]["messages"] == [{"role": "user", "content": "the prompt"}]

    def test_missing_key(self, monkeypatch):
        monkeypatch.delenv("CHAT_API_KEY", raising=False)
        provider = pv.RemoteChatProvider(chat_cfg(), client=fake_client(
            lambda r: httpx.Response(200)))
        with pytest.raises(pv.ProviderError):
            provider.complete("p")

    def test_http_error(self, monkeypatch):
        monkeypatch.setenv("CHAT_API_KEY", "sk-chat")
        provider = pv.RemoteChatProvider(chat_cfg(), client=fake_client(
            lambda r: httpx.Response(500)))
        with pytest.raises(pv.ProviderError):
            provider.complete("p")

    def test_malformed_body(self, monkeypatch):
        monkeypatch.setenv("CHAT_API_KEY", "sk-chat")
        provider = pv.RemoteChatProvider(chat_cfg(), client=fake_client(
            lambda r: httpx.Response(200, json={"choices": []})))
        with pytest.raises(pv.ProviderError):
            provider.complete("p")


class TestConfigAndFactory:
    def test_temperature_pinned(self):
        with pytest.raises(ValueError):
            pv.LlmProviderConfig(kind="oracle", temperature=0.7)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            pv.LlmProviderConfig(kind="psychic")

    def test_factory(self, labs, tmp_path):
        oracle = pv.make_provider(pv.LlmProviderConfig(kind="oracle"), labs=labs)
        assert oracle.kind == "oracle"
        replay = pv.make_provider(pv.LlmProviderConfig(
            kind="replay", transcript_path=str(tmp_path / "t.jsonl")))
        assert replay.kind == "replay"
        with pytest.raises(ValueError):
            pv.make_provider(pv.LlmProviderConfig(kind="oracle"))
        with pytest.raises(ValueError):
            pv.make_provider(pv.LlmProviderConfig(kind="replay"))
