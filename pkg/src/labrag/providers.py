"""Chat-model providers behind one interface: a remote HTTP chat API, a
ground-truth oracle for closed-loop testing, and a record/replay transcript
provider."""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass
from typing import Optional, Protocol

import httpx

from .datasets import LabRecord
from .factors import factor_order

TASK_FACTORS = "factors"
TASK_RANGE = "range"


class ProviderError(Exception):
    pass


class UnknownLab(ProviderError):
    """Prompt references a lab absent from the ground-truth datasets."""


class MissingRecording(ProviderError):
    """Strict replay hit a prompt that was never recorded."""


@dataclass(frozen=True)
class LlmProviderConfig:
    kind: str = "oracle"  # "remote-chat" | "oracle" | "replay"
    model_name: str = "gpt-4-turbo"
    temperature: float = 0.0
    endpoint_url: str = ""
    api_key_env: str = "CHAT_API_KEY"
    transcript_path: str = ""

    def __post_init__(self):
        if self.temperature != 0.0:
            raise ValueError("temperature is fixed at 0.0")
        if self.kind not in ("remote-chat", "oracle", "replay"):
            raise ValueError(f"unknown provider kind {self.kind!r}")


class LlmProvider(Protocol):
    kind: str

    def complete(self, prompt: str, task: str = "chat") -> str: ...


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


_QUESTION_RE = re.compile(r"^Question:\s*(.+)$", re.MULTILINE)
_FACTOR_LINE_RE = re.compile(r"^- ([^:]+): (.+)$", re.MULTILINE)


class OracleProvider:
    """Answers factor prompts with the ground-truth factor list and range
    prompts with the ground-truth range string."""

    kind = "oracle"

    def __init__(self, labs: list[LabRecord]):
        # Longest-first so a lab whose name embeds another lab's name wins.
        self._labs = sorted(labs, key=lambda l: -len(l.lab_name))

    def _find_lab(self, prompt: str) -> LabRecord:
        questions = _QUESTION_RE.findall(prompt)
        haystack = (questions[-1] if questions else prompt).lower()
        for lab in self._labs:
            if lab.lab_name.lower() in haystack:
                return lab
        raise UnknownLab(f"no known lab in prompt question {haystack[:120]!r}")

    def complete(self, prompt: str, task: str = "chat") -> str:
        lab = self._find_lab(prompt)
        if task == TASK_FACTORS:
            return ", ".join(factor_order(lab.factors)) if lab.factors else "None"
        if task == TASK_RANGE:
            given = {f.strip().lower(): v.strip().lower()
                     for f, v in _FACTOR_LINE_RE.findall(prompt)}
            for q in lab.questions:
                want = {f.lower(): v.lower() for f, v in q.factor_values.items()}
                if want == given:
                    return q.true_answer
            raise UnknownLab(
                f"no question of {lab.lab_name!r} matches factor values {given!r}")
        raise ProviderError(f"oracle cannot answer task {task!r}")


class ReplayProvider:
    """JSON Lines transcript of {prompt_sha256, response} pairs.

    Strict mode answers only from the transcript; record mode forwards
    misses to an inner provider and appends the new pair."""

    kind = "replay"

    def __init__(self, transcript_path, inner: Optional[LlmProvider] = None):
        self._path = str(transcript_path)
        self._inner = inner
        self._pairs: dict[str, str] = {}
        if os.path.exists(self._path):
            with open(self._path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        self._pairs[rec["prompt_sha256"]] = rec["response"]

    def complete(self, prompt: str, task: str = "chat") -> str:
        digest = prompt_digest(prompt)
        if digest in self._pairs:
            return self._pairs[digest]
        if self._inner is None:
            raise MissingRecording(f"no recording for prompt {digest[:12]}…")
        response = self._inner.complete(prompt, task)
        self._pairs[digest] = response
        with open(self._path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"prompt_sha256": digest, "response": response}) + "\n")
        return response


class RemoteChatProvider:
    """Minimal HTTP chat completion client (temperature pinned to 0)."""

    kind = "remote-chat"

    def __init__(self, cfg: LlmProviderConfig, client: Optional[httpx.Client] = None):
        if not cfg.endpoint_url:
            raise ValueError("remote-chat requires endpoint_url")
        self._cfg = cfg
        self._client = client or httpx.Client(timeout=60.0)

    def complete(self, prompt: str, task: str = "chat") -> str:
        key = os.environ.get(self._cfg.api_key_env, "")
        if not key:
            raise ProviderError(f"no API key in ${self._cfg.api_key_env}")
        try:
            resp = self._client.post(
                self._cfg.endpoint_url,
                headers={"Authorization": f"Bearer {key}"},
                json={
                    "model": self._cfg.model_name,
                    "temperature": 0.0,
                    "messages": [{"role": "user", "content": prompt}],
                },
            )
        except httpx.HTTPError as exc:
            raise ProviderError(f"chat endpoint unreachable: {type(exc).__name__}") from exc
        if resp.status_code != 200:
            raise ProviderError(f"chat endpoint returned {resp.status_code}")
        body = resp.json()
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError) as exc:
            raise ProviderError("malformed chat response") from exc


def make_provider(cfg: LlmProviderConfig, labs: Optional[list[LabRecord]] = None) -> LlmProvider:
    if cfg.kind == "oracle":
        if labs is None:
            raise ValueError("oracle provider needs ground-truth labs")
        return OracleProvider(labs)
    if cfg.kind == "replay":
        if not cfg.transcript_path:
            raise ValueError("replay provider needs transcript_path")
        return ReplayProvider(cfg.transcript_path)
    return RemoteChatProvider(cfg)
