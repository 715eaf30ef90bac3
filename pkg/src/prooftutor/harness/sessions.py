"""Live tutoring sessions: one learner working one problem.

Sessions live in memory with a two-hour expiry, optionally mirrored to a
JSON file so a restarted service picks live proofs back up. Mutations on
a session are serialized through its own lock; the knowledge graphs they
query are immutable and shared.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from ..formula import parse, render
from ..kg import KnowledgeGraph, ProofState, StepClassification
from ..rules import Derivation, RuleId

__all__ = ["HistoryEntry", "Session", "SessionStore", "SESSION_TTL_S"]

SESSION_TTL_S = 2 * 60 * 60


@dataclass
class HistoryEntry:
    derivation: Derivation | None  # None when the attempt was rejected
    attempted_step: str
    attempted_rule: str
    classification: StepClassification
    feedback: str
    accepted: bool


@dataclass
class Session:
    session_id: str
    state: ProofState
    kg: KnowledgeGraph
    created_at: float
    expires_at: float
    history: list = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def completed(self) -> bool:
        return self.state.problem.conclusion in self.state.key()

    def replayed_state(self) -> ProofState:
        """Fold the accepted history over the initial state; must equal state."""
        state = ProofState(self.state.problem)
        for entry in self.history:
            if entry.accepted and entry.derivation is not None:
                state = state.extended(entry.derivation)
        return state


class SessionStore:
    """In-memory sessions, optionally mirrored to a JSON file.

    Persistence keeps the authoritative proof state (accepted
    derivations) and history; the graphs are re-bound from the engine on
    restore.
    """

    def __init__(self, ttl_s: float = SESSION_TTL_S, persist_path: str | None = None):
        self._ttl = ttl_s
        self._persist_path = Path(persist_path) if persist_path else None
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, problem, kg: KnowledgeGraph) -> Session:
        now = time.time()
        session = Session(
            session_id=uuid.uuid4().hex,
            state=ProofState(problem),
            kg=kg,
            created_at=now,
            expires_at=now + self._ttl,
        )
        with self._lock:
            self._sessions[session.session_id] = session
        self.persist()
        return session

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None:
                return None
            if session.expires_at < time.time():
                del self._sessions[session_id]
                return None
            return session

    def sweep(self) -> None:
        now = time.time()
        with self._lock:
            expired = [sid for sid, s in self._sessions.items() if s.expires_at < now]
            for sid in expired:
                del self._sessions[sid]

    # -- optional file mirror ------------------------------------------------

    def persist(self) -> None:
        if self._persist_path is None:
            return
        with self._lock:
            doc = {
                "format_version": 1,
                "sessions": [_session_to_dict(s) for s in self._sessions.values()],
            }
        tmp = self._persist_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc), encoding="utf-8")
        tmp.replace(self._persist_path)

    def restore(self, problems_by_id: dict, kgs: dict) -> int:
        """Load previously persisted sessions whose problems still exist."""
        if self._persist_path is None or not self._persist_path.exists():
            return 0
        doc = json.loads(self._persist_path.read_text(encoding="utf-8"))
        now = time.time()
        restored = 0
        for raw in doc.get("sessions", []):
            if raw["expires_at"] < now or raw["problem_id"] not in problems_by_id:
                continue
            session = _session_from_dict(
                raw, problems_by_id[raw["problem_id"]], kgs[raw["problem_id"]]
            )
            with self._lock:
                self._sessions[session.session_id] = session
            restored += 1
        return restored


def _derivation_to_dict(d: Derivation) -> dict:
    return {
        "statement": render(d.derived),
        "rule": d.rule.value,
        "parents": [render(p) for p in d.parents],
    }


def _derivation_from_dict(doc: dict) -> Derivation:
    return Derivation(
        parse(doc["statement"]), RuleId(doc["rule"]), tuple(parse(p) for p in doc["parents"])
    )


def _session_to_dict(s: Session) -> dict:
    return {
        "session_id": s.session_id,
        "problem_id": s.state.problem.id,
        "created_at": s.created_at,
        "expires_at": s.expires_at,
        "intermediates": [_derivation_to_dict(d) for d in s.state.intermediates],
        "history": [
            {
                "derivation": None if e.derivation is None else _derivation_to_dict(e.derivation),
                "attempted_step": e.attempted_step,
                "attempted_rule": e.attempted_rule,
                "classification": e.classification.to_dict(),
                "feedback": e.feedback,
                "accepted": e.accepted,
            }
            for e in s.history
        ],
    }


def _session_from_dict(doc: dict, problem, kg: KnowledgeGraph) -> Session:
    state = ProofState(
        problem, tuple(_derivation_from_dict(d) for d in doc["intermediates"])
    )
    history = [
        HistoryEntry(
            derivation=None
            if e["derivation"] is None
            else _derivation_from_dict(e["derivation"]),
            attempted_step=e["attempted_step"],
            attempted_rule=e["attempted_rule"],
            classification=StepClassification.from_dict(e["classification"]),
            feedback=e["feedback"],
            accepted=e["accepted"],
        )
        for e in doc["history"]
    ]
    return Session(
        session_id=doc["session_id"],
        state=state,
        kg=kg,
        created_at=doc["created_at"],
        expires_at=doc["expires_at"],
        history=history,
    )
