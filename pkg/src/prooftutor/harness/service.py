"""HTTP service: problems, sessions, step submission, tiered hints.

The server is authoritative: every verdict shown to a client is the
engine's classification, and a session's board state only changes when a
justified Optimal or ValidNonOptimal step is accepted. Hint tiers mirror
the two information-access levels: ``tutor`` serves the statement only,
``teacher`` a full derivation scaffold.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from ..formula import Formula, ParseError, parse, render
from ..kg import (
    KnowledgeGraph,
    NoOptimalStep,
    StepCategory,
    StepClassification,
    classify_step,
    optimal_steps,
)
from ..pipeline import Candidate, StudentResponse, HintPacket, run_feedback
from ..rules import Derivation, RuleId, apply_rule, rule_arity
from .sessions import HistoryEntry, Session, SessionStore

__all__ = ["TutorEngine", "create_app"]


class TutorEngine:
    """Shared immutable state behind the service: corpus, graphs, backends."""

    def __init__(
        self,
        manifest,
        kgs: dict,
        feedback_backends: dict | None = None,
        session_store_path: str | None = None,
    ):
        self.manifest = manifest
        self.kgs = kgs
        self.feedback_backends = feedback_backends or {}
        self.sessions = SessionStore(persist_path=session_store_path)
        if session_store_path is not None:
            self.sessions.restore({p.id: p for p in manifest.problems}, kgs)

    def kg_for(self, problem_id: str) -> KnowledgeGraph:
        return self.kgs[problem_id]


class CreateSessionRequest(BaseModel):
    problem_id: str


class StepRequest(BaseModel):
    step: str
    rule: str
    parent_indices: list[int] = Field(default_factory=list)


class CandidatesRequest(BaseModel):
    rule: str
    parent_indices: list[int] = Field(default_factory=list)


def _template_feedback(classification: StepClassification, step_text: str) -> str:
    """Offline feedback from the classification alone; leaks no rule names."""
    category = classification.category
    if category is StepCategory.Optimal and classification.justified:
        return (
            f"{step_text} is exactly the right move, and your justification checks out. "
            "The proof is one step shorter now."
        )
    if category is StepCategory.Optimal:
        return (
            f"{step_text} is the right statement, but the justification you gave does not "
            "derive it. Which statements actually produce it, and by which move?"
        )
    if category is StepCategory.ValidNonOptimal and classification.justified:
        return (
            f"{step_text} does follow from what you have, so it has been added. "
            "It does not bring the conclusion closer, though: is there a more direct line?"
        )
    if category is StepCategory.ValidNonOptimal:
        return (
            f"{step_text} is derivable here, but not the way you justified it, so it was "
            "not added. Check which statements your move really needs."
        )
    return (
        f"{step_text} does not follow in a single step from the statements on the board. "
        "Re-examine the shapes of the lines you cited before trying again."
    )


def _board(session: Session) -> dict:
    state = session.state
    statements = []
    index_of: dict[Formula, int] = {}
    for i, premise in enumerate(state.problem.premises, start=1):
        statements.append(
            {
                "index": i,
                "text": render(premise),
                "display": render(premise, "unicode"),
                "origin": "premise",
                "rule": None,
                "parents": None,
            }
        )
        index_of.setdefault(premise, i)
    offset = len(state.problem.premises)
    for j, derivation in enumerate(state.intermediates, start=1):
        idx = offset + j
        statements.append(
            {
                "index": idx,
                "text": render(derivation.derived),
                "display": render(derivation.derived, "unicode"),
                "origin": "derived",
                "rule": derivation.rule.value,
                "parents": [index_of[p] for p in derivation.parents if p in index_of],
            }
        )
        index_of.setdefault(derivation.derived, idx)
    distance = session.kg.distances.get(state.key())
    return {
        "session_id": session.session_id,
        "problem_id": state.problem.id,
        "level": state.problem.level,
        "statements": statements,
        "conclusion": render(state.problem.conclusion),
        "conclusion_display": render(state.problem.conclusion, "unicode"),
        "completed": session.completed,
        "distance": distance,
        "history": [
            {
                "step": e.attempted_step,
                "rule": e.attempted_rule,
                "category": e.classification.category.value,
                "justified": e.classification.justified,
                "accepted": e.accepted,
                "feedback": e.feedback,
            }
            for e in session.history
        ],
    }


def create_app(engine: TutorEngine, frontend_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="prooftutor", version="0.1.0")

    def get_session(session_id: str) -> Session:
        session = engine.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown or expired session")
        return session

    @app.get("/problems")
    def list_problems() -> list[dict]:
        return [
            {
                "id": p.id,
                "level": p.level,
                "premises": [render(f) for f in p.premises],
                "premises_display": [render(f, "unicode") for f in p.premises],
                "conclusion": render(p.conclusion),
                "conclusion_display": render(p.conclusion, "unicode"),
            }
            for p in engine.manifest.problems
        ]

    @app.post("/sessions", status_code=201)
    def create_session(request: CreateSessionRequest) -> dict:
        try:
            problem = engine.manifest.problem(request.problem_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown problem {request.problem_id!r}")
        session = engine.sessions.create(problem, engine.kg_for(problem.id))
        return _board(session)

    @app.get("/sessions/{session_id}")
    def get_board(session_id: str) -> dict:
        return _board(get_session(session_id))

    @app.post("/sessions/{session_id}/step")
    def submit_step(session_id: str, request: StepRequest) -> dict:
        session = get_session(session_id)
        with session.lock:
            if session.completed:
                raise HTTPException(status_code=409, detail="proof already complete")
            try:
                step = parse(request.step)
            except ParseError as exc:
                raise HTTPException(status_code=422, detail=f"unparseable step: {exc}")
            try:
                rule = RuleId(request.rule)
            except ValueError:
                raise HTTPException(status_code=422, detail=f"unknown rule {request.rule!r}")
            ordered = session.state.ordered_statements()
            parents = []
            for idx in request.parent_indices:
                if not 1 <= idx <= len(ordered):
                    raise HTTPException(status_code=422, detail=f"no statement numbered {idx}")
                parents.append(ordered[idx - 1])
            classification = classify_step(session.kg, session.state, step, rule, parents)
            accepted = classification.justified and classification.category in (
                StepCategory.Optimal,
                StepCategory.ValidNonOptimal,
            )
            feedback = _live_or_template_feedback(engine, session, request.step, rule, parents, classification)
            derivation = None
            if accepted:
                derivation = Derivation(step, rule, tuple(parents))
                session.state = session.state.extended(derivation)
            session.history.append(
                HistoryEntry(
                    derivation=derivation,
                    attempted_step=request.step,
                    attempted_rule=request.rule,
                    classification=classification,
                    feedback=feedback,
                    accepted=accepted,
                )
            )
            engine.sessions.persist()
            board = _board(session)
            return {
                "classification": classification.to_dict(),
                "accepted": accepted,
                "feedback": feedback,
                "board": board,
            }

    @app.post("/sessions/{session_id}/hint")
    def request_hint(session_id: str, tier: str = "tutor") -> dict:
        if tier not in ("tutor", "teacher"):
            raise HTTPException(status_code=422, detail="tier must be 'tutor' or 'teacher'")
        session = get_session(session_id)
        with session.lock:
            if session.completed:
                raise HTTPException(status_code=409, detail="proof already complete")
            try:
                best = optimal_steps(session.kg, session.state)[0]
            except NoOptimalStep as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            statement = render(best.derived)
            if tier == "tutor":
                return {
                    "tier": tier,
                    "statement": statement,
                    "statement_display": render(best.derived, "unicode"),
                }
            parents = " and ".join(render(p) for p in best.parents)
            return {
                "tier": tier,
                "statement": statement,
                "statement_display": render(best.derived, "unicode"),
                "rule": best.rule.value,
                "parents": [render(p) for p in best.parents],
                "scaffold": f"Derive {statement} from {parents} using {best.rule.value}.",
            }

    @app.post("/sessions/{session_id}/candidates")
    def derive_candidates(session_id: str, request: CandidatesRequest) -> dict:
        session = get_session(session_id)
        with session.lock:
            try:
                rule = RuleId(request.rule)
            except ValueError:
                raise HTTPException(status_code=422, detail=f"unknown rule {request.rule!r}")
            ordered = session.state.ordered_statements()
            parents = []
            for idx in request.parent_indices:
                if not 1 <= idx <= len(ordered):
                    raise HTTPException(status_code=422, detail=f"no statement numbered {idx}")
                parents.append(ordered[idx - 1])
            if len(parents) != rule_arity(rule):
                raise HTTPException(
                    status_code=422,
                    detail=f"{rule.value} needs {rule_arity(rule)} parent statement(s)",
                )
            results = apply_rule(rule, tuple(parents), session.kg.config)
            existing = session.state.statements()
            candidates = sorted(render(f) for f in results if f not in existing)
            return {
                "rule": rule.value,
                "candidates": candidates,
                "candidates_display": [render(parse(c), "unicode") for c in candidates],
            }

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="frontend")

    return app


def _live_or_template_feedback(
    engine: TutorEngine,
    session: Session,
    step_text: str,
    rule: RuleId,
    parents: list,
    classification: StepClassification,
) -> str:
    backend = engine.feedback_backends.get("tutor")
    if backend is None:
        return _template_feedback(classification, step_text)
    try:
        best = optimal_steps(session.kg, session.state)[0]
    except NoOptimalStep:
        return _template_feedback(classification, step_text)
    try:
        step = parse(step_text)
        student = StudentResponse(
            candidates=(
                Candidate(step_text, "submitted through the proof board"),
                Candidate(step_text, "sole candidate under consideration"),
            ),
            reasoning="submitted live from the proof board",
            next_step=step,
            rule=rule,
            parents=tuple(parents) if parents else (step,),
        )
        response, _ = run_feedback(
            "tutor", backend, session.state, student, HintPacket.for_tutor(best)
        )
        return response.feedback
    except Exception:
        return _template_feedback(classification, step_text)
