"""HTTP+JSON session service exposing the conversation engine."""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import session as sess
from .datasets import load_labs
from .embedding import EmbeddingProviderConfig
from .factors import FactorQuestion
from .index import Index, load as load_index
from .providers import LlmProviderConfig, ProviderError, make_provider
from .session import (EmptyQuery, InvalidChoice, MissingFactor, NoAnswer,
                      NotInCorpus, Orchestrator, RetrievalFailed, Session,
                      Stage, WrongStage)

logger = logging.getLogger(__name__)

DISCLAIMER = ("This information is for educational purposes only and is not "
              "medical advice. Talk to your health care provider about your results.")


@dataclass
class AppConfig:
    index_path: str = ""
    dataset_path: str = ""  # ground truth for the oracle provider; packaged default
    embedding: EmbeddingProviderConfig = field(default_factory=EmbeddingProviderConfig)
    llm: LlmProviderConfig = field(default_factory=LlmProviderConfig)
    listen_host: str = "127.0.0.1"
    listen_port: int = 8080
    session_ttl: float = 1800.0
    persist_path: str = ""  # append-only session snapshot log; empty = memory only
    log_level: str = "INFO"

    def __post_init__(self):
        if self.session_ttl <= 0:
            raise ValueError("session_ttl must be > 0")


def load_config(path) -> AppConfig:
    import tomli

    with open(path, "rb") as fh:
        raw = tomli.load(fh)
    emb_cfg = EmbeddingProviderConfig(**raw.pop("embedding", {}))
    llm_cfg = LlmProviderConfig(**raw.pop("llm", {}))
    return AppConfig(embedding=emb_cfg, llm=llm_cfg, **raw)


# --- session (de)serialization ---

def session_to_dict(s: Session) -> dict:
    return {
        "session_id": s.session_id,
        "stage": s.stage.value,
        "lab_query": s.lab_query,
        "retrieved": [dataclasses.asdict(h) for h in s.retrieved],
        "pending_questions": [dataclasses.asdict(q) for q in s.pending_questions],
        "collected_answers": s.collected_answers,
        "answer": dataclasses.asdict(s.answer) if s.answer else None,
        "failure_reason": s.failure_reason,
        "transcript": [list(t) for t in s.transcript],
    }


def session_from_dict(d: dict) -> Session:
    from .index import RetrievalHit

    s = Session(session_id=d["session_id"], lab_query=d["lab_query"],
                stage=Stage(d["stage"]))
    s.retrieved = [RetrievalHit(**h) for h in d["retrieved"]]
    s.pending_questions = [
        FactorQuestion(factor=q["factor"], choices=tuple(q["choices"]),
                       allows_free_text=q["allows_free_text"])
        for q in d["pending_questions"]]
    s.collected_answers = dict(d["collected_answers"])
    if d["answer"]:
        s.answer = sess.NormalRangeAnswer(**d["answer"])
    s.failure_reason = d["failure_reason"]
    s.transcript = [tuple(t) for t in d["transcript"]]
    return s


class SessionStore:
    """In-memory session map with TTL eviction; optional append-only snapshot
    log so sessions survive restarts."""

    def __init__(self, ttl: float, persist_path: str = ""):
        self.ttl = ttl
        self.persist_path = persist_path
        self._items: dict[str, tuple[Session, float]] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._mutex = threading.Lock()
        if persist_path and os.path.exists(persist_path):
            self._replay()

    def _replay(self) -> None:
        latest: dict[str, dict] = {}
        with open(self.persist_path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    latest[rec["session_id"]] = rec
        now = time.time()
        for sid, rec in latest.items():
            if rec["deadline"] > now:
                self._items[sid] = (session_from_dict(rec["snapshot"]), rec["deadline"])
                self._locks[sid] = threading.Lock()
        logger.info("restored %d sessions from %s", len(self._items), self.persist_path)

    def _persist(self, session: Session, deadline: float) -> None:
        if not self.persist_path:
            return
        rec = {"session_id": session.session_id, "deadline": deadline,
               "snapshot": session_to_dict(session)}
        with open(self.persist_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")

    def sweep(self) -> None:
        now = time.time()
        with self._mutex:
            dead = [sid for sid, (_, dl) in self._items.items() if dl <= now]
            for sid in dead:
                del self._items[sid]
                self._locks.pop(sid, None)

    def put(self, session: Session) -> None:
        deadline = time.time() + self.ttl
        with self._mutex:
            self._items[session.session_id] = (session, deadline)
            self._locks.setdefault(session.session_id, threading.Lock())
        self._persist(session, deadline)

    def get(self, session_id: str) -> Optional[Session]:
        with self._mutex:
            item = self._items.get(session_id)
            if item is None:
                return None
            session, deadline = item
            if deadline <= time.time():
                del self._items[session_id]
                self._locks.pop(session_id, None)
                return None
            return session

    def lock(self, session_id: str) -> Optional[threading.Lock]:
        with self._mutex:
            return self._locks.get(session_id)

    def touch(self, session: Session) -> None:
        self.put(session)

    def __len__(self) -> int:
        return len(self._items)


def _error(status: int, code: str, message: str, details=None) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"code": code, "message": message,
                                 "details": details or {}})


def _question_payload(q: FactorQuestion) -> dict:
    return {"factor": q.factor, "choices": list(q.choices),
            "allows_free_text": q.allows_free_text}


def _answer_payload(answer: sess.NormalRangeAnswer) -> dict:
    return {"text": answer.text, "source_url": answer.source_url,
            "factors_applied": answer.factors_applied, "disclaimer": DISCLAIMER}


def _session_view(session: Session) -> dict:
    view = {"session_id": session.session_id, "stage": session.stage.value}
    if session.stage is Stage.AWAITING_FACTORS:
        view["questions"] = [_question_payload(q) for q in session.pending_questions]
    if session.answer is not None:
        view["answer"] = _answer_payload(session.answer)
    if session.failure_reason:
        view["failure_reason"] = session.failure_reason
    return view


def create_app(config: AppConfig, *, index: Optional[Index] = None,
               orchestrator: Optional[Orchestrator] = None) -> FastAPI:
    logging.basicConfig(level=config.log_level)
    app = FastAPI(title="labrag", version="0.1.0")

    if orchestrator is None:
        if index is None:
            index = load_index(config.index_path)
        labs = load_labs(config.dataset_path or None) if config.llm.kind == "oracle" else None
        provider = make_provider(config.llm, labs=labs)
        orchestrator = Orchestrator(index, config.embedding, provider)
    engine = orchestrator
    store = SessionStore(config.session_ttl, config.persist_path)

    app.state.engine = engine
    app.state.store = store

    @app.get("/v1/health")
    def health():
        if engine.index is None or len(engine.index) == 0:
            return _error(503, "IndexNotLoaded", "vector index is not loaded")
        return {"status": "ok", "index_size": len(engine.index),
                "provider_kind": engine.provider.kind}

    @app.post("/v1/sessions")
    async def create_session(request: Request):
        store.sweep()
        try:
            body = await request.json()
        except Exception:
            return _error(400, "BadRequest", "body is not valid JSON")
        question = (body or {}).get("question", "")
        try:
            session = engine.start_session(question)
            engine.retrieve_factors(session)
        except EmptyQuery as exc:
            return _error(400, "EmptyQuery", str(exc))
        except NotInCorpus as exc:
            return _error(404, "NotInCorpus", str(exc))
        except NoAnswer:
            pass  # session Failed; return its view below
        except (ProviderError, RetrievalFailed) as exc:
            return _error(502, "ProviderError", str(exc))
        store.put(session)
        return _session_view(session)

    @app.post("/v1/sessions/{session_id}/answers")
    async def submit_answers(session_id: str, request: Request):
        session = store.get(session_id)
        if session is None:
            return _error(404, "UnknownSession", "no such session (or expired)")
        try:
            body = await request.json()
        except Exception:
            return _error(400, "BadRequest", "body is not valid JSON")
        answers = (body or {}).get("answers", {})
        lock = store.lock(session_id)
        if lock is None:
            return _error(404, "UnknownSession", "no such session (or expired)")
        with lock:
            try:
                engine.submit_answers(session, answers)
            except WrongStage as exc:
                return _error(409, "WrongStage", str(exc))
            except MissingFactor as exc:
                return _error(422, "MissingFactor", str(exc),
                              details={"factors": exc.factors})
            except InvalidChoice as exc:
                return _error(422, "InvalidChoice", str(exc))
            except NotInCorpus as exc:
                return _error(404, "NotInCorpus", str(exc))
            except ProviderError as exc:
                return _error(502, "ProviderError", str(exc))
            store.touch(session)
        view = _session_view(session)
        view.pop("session_id", None)
        view.pop("questions", None)
        return view

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        session = store.get(session_id)
        if session is None:
            return _error(404, "UnknownSession", "no such session (or expired)")
        view = _session_view(session)
        view["transcript"] = [
            {"role": role, "text": text, "timestamp": ts}
            for role, text, ts in session.transcript]
        view["collected_answers"] = session.collected_answers
        return view

    return app
