"""The conversation engine: per-session state machine that retrieves context,
extracts the factors conditioning a lab's normal range, asks follow-ups, and
returns the factor-specific range with its source URL."""

from __future__ import annotations

import secrets
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from importlib import resources
from typing import Callable, Optional

from . import embedding as emb
from . import index as idx
from .factors import (FactorQuestion, factor_order, make_factor_questions,
                      parse_factor_response)
from .providers import TASK_FACTORS, TASK_RANGE, LlmProvider, UnknownLab

TOP_K = 2


class EmptyQuery(Exception):
    pass


class RetrievalFailed(Exception):
    pass


class NotInCorpus(Exception):
    pass


class NoAnswer(Exception):
    """Provider returned "N/A" or nothing usable; never surfaced verbatim."""


class MissingFactor(Exception):
    def __init__(self, factors: list[str]):
        self.factors = factors
        super().__init__(f"unanswered factors: {factors}")


class InvalidChoice(Exception):
    pass


class WrongStage(Exception):
    pass


class Stage(str, Enum):
    AWAITING_QUERY = "AwaitingQuery"
    AWAITING_FACTORS = "AwaitingFactors"
    ANSWERED = "Answered"
    FAILED = "Failed"


_TERMINAL = {Stage.ANSWERED, Stage.FAILED}


@dataclass(frozen=True)
class NormalRangeAnswer:
    text: str
    source_url: str
    factors_applied: dict

    def __post_init__(self):
        if not self.text:
            raise ValueError("empty answer text")
        object.__setattr__(self, "factors_applied", dict(self.factors_applied))


@dataclass
class Session:
    session_id: str
    lab_query: str
    stage: Stage = Stage.AWAITING_QUERY
    retrieved: list = field(default_factory=list)
    pending_questions: list = field(default_factory=list)
    collected_answers: dict = field(default_factory=dict)
    answer: Optional[NormalRangeAnswer] = None
    failure_reason: str = ""
    transcript: list = field(default_factory=list)  # (role, text, iso timestamp)


def _load_asset(name: str) -> str:
    return resources.files("labrag").joinpath(f"assets/{name}").read_text("utf-8")


def _render(template: str, **subs: str) -> str:
    # Comment lines are asset metadata, not prompt content.
    body = "\n".join(l for l in template.splitlines() if not l.startswith("#"))
    for key, value in subs.items():
        body = body.replace("{" + key + "}", value)
    return body.strip() + "\n"


def _utc_now() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


class Orchestrator:
    """Shared, read-only engine; each Session carries the per-conversation
    state. One in-flight operation per session is the caller's contract."""

    def __init__(self, index: idx.Index, embed_cfg: emb.EmbeddingProviderConfig,
                 provider: LlmProvider, clock: Callable[[], str] = _utc_now):
        self.index = index
        self.embed_cfg = embed_cfg
        self.provider = provider
        self.clock = clock
        self._factor_template = _load_asset("factor_prompt.txt")
        self._range_template = _load_asset("range_prompt.txt")

    # -- helpers --

    def _say(self, session: Session, role: str, text: str) -> None:
        session.transcript.append((role, text, self.clock()))

    def _context(self, session: Session) -> str:
        return "\n".join(hit.text for hit in session.retrieved)

    def _fail(self, session: Session, reason: str) -> None:
        session.stage = Stage.FAILED
        session.failure_reason = reason

    # -- operations --

    def start_session(self, user_question: str) -> Session:
        if not user_question or not user_question.strip():
            raise EmptyQuery("question must be non-empty")
        session = Session(session_id=secrets.token_hex(16),
                          lab_query=user_question.strip())
        self._say(session, "user", session.lab_query)
        try:
            query_vec = emb.embed(session.lab_query, self.embed_cfg)
            session.retrieved = idx.search(self.index, query_vec, k=TOP_K)
        except Exception as exc:
            raise RetrievalFailed(str(exc)) from exc
        return session

    def retrieve_factors(self, session: Session) -> frozenset:
        if not session.retrieved:
            raise WrongStage("session has no retrieved context")
        if session.stage is not Stage.AWAITING_QUERY:
            raise WrongStage(f"cannot retrieve factors in stage {session.stage.value}")
        prompt = _render(self._factor_template,
                         context=self._context(session), lab=session.lab_query)
        try:
            raw = self.provider.complete(prompt, task=TASK_FACTORS)
        except UnknownLab as exc:
            self._fail(session, "NotInCorpus")
            raise NotInCorpus(str(exc)) from exc
        self._say(session, "assistant", raw)
        factors = parse_factor_response(raw)
        if not factors:
            self._answer(session)
            return factors
        doc_text = session.retrieved[0].text if session.retrieved else ""
        session.pending_questions = make_factor_questions(
            factors, session.lab_query, doc_text)
        session.stage = Stage.AWAITING_FACTORS
        return factors

    def submit_answers(self, session: Session, answers: dict) -> Session:
        if session.stage is not Stage.AWAITING_FACTORS:
            raise WrongStage(f"cannot submit answers in stage {session.stage.value}")
        by_factor = {q.factor: q for q in session.pending_questions}
        missing = [f for f in by_factor if f not in answers]
        if missing:
            raise MissingFactor(factor_order(missing))
        for factor, value in answers.items():
            question = by_factor.get(factor)
            if question is None:
                raise InvalidChoice(f"unexpected factor {factor!r}")
            if not question.accepts(str(value)):
                raise InvalidChoice(
                    f"{value!r} is not a valid choice for {factor!r} "
                    f"(choices: {list(question.choices)})")
        session.collected_answers = {f: str(answers[f]) for f in by_factor}
        self._say(session, "user",
                  "; ".join(f"{f}: {session.collected_answers[f]}"
                            for f in factor_order(session.collected_answers)))
        try:
            self._answer(session)
        except NoAnswer:
            pass  # session already marked Failed
        return session

    def retrieve_normal_range(self, session: Session) -> NormalRangeAnswer:
        if session.stage in _TERMINAL:
            if session.answer is not None:
                return session.answer
            raise WrongStage(f"session already {session.stage.value}")
        unanswered = [q.factor for q in session.pending_questions
                      if q.factor not in session.collected_answers]
        if unanswered:
            raise MissingFactor(factor_order(unanswered))
        return self._answer(session)

    def _answer(self, session: Session) -> NormalRangeAnswer:
        factor_lines = "\n".join(
            f"- {f}: {session.collected_answers[f]}"
            for f in factor_order(session.collected_answers)) or "(none)"
        prompt = _render(self._range_template,
                         context=self._context(session),
                         factors=factor_lines, lab=session.lab_query)
        try:
            raw = self.provider.complete(prompt, task=TASK_RANGE)
        except UnknownLab as exc:
            self._fail(session, "NotInCorpus")
            raise NotInCorpus(str(exc)) from exc
        if not raw.strip() or raw.strip().upper() == "N/A":
            self._fail(session, "NoAnswer")
            self._say(session, "system", "no usable range in model response")
            raise NoAnswer(f"provider returned {raw!r}")
        answer = NormalRangeAnswer(text=raw.strip(),
                                   source_url=session.retrieved[0].url,
                                   factors_applied=session.collected_answers)
        session.answer = answer
        session.stage = Stage.ANSWERED
        self._say(session, "assistant", answer.text)
        return answer
