"""The single-round Student -> feedback -> revision protocol.

Four pipeline kinds share one engine: Tutor (statement-only hint),
Teacher (full derivation context), Judge (tutor feedback verified with
full context), and TeacherJudge (the ablation that verifies teacher
feedback instead). Student responses and upstream feedback can be cached
and reused across kinds so that pipelines are compared on identical
inputs.

All agent traffic is structured JSON. Validation is strict: required
fields exactly, unknown fields rejected. Empty or malformed output is
retried up to three times; a record that hits the ceiling is flagged for
review.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .backends import AgentBackend
from .formula import Formula, ParseError, parse, render
from .kg import KnowledgeGraph, ProofState, StepClassification, classify_step, optimal_steps
from .prompts import (
    NO_IMPROVEMENT,
    Message,
    build_judge_messages,
    build_revision_messages,
    build_student_messages,
    build_teacher_messages,
    build_tutor_messages,
    tutor_prompt_structure_violations,
)
from .rules import Derivation, RuleId

__all__ = [
    "PipelineKind",
    "CorrectnessLabel",
    "JudgeAction",
    "MAX_SCHEMA_RETRIES",
    "MalformedResponse",
    "InformationLeak",
    "HintPacket",
    "Candidate",
    "StudentResponse",
    "FeedbackResponse",
    "JudgeResponse",
    "RevisionResponse",
    "Transcript",
    "DialogueRecord",
    "run_student",
    "run_feedback",
    "run_judge",
    "run_revision",
    "run_pipeline",
]

MAX_SCHEMA_RETRIES = 3


class PipelineKind(str, Enum):
    Tutor = "Tutor"
    Teacher = "Teacher"
    Judge = "Judge"
    TeacherJudge = "TeacherJudge"


class CorrectnessLabel(str, Enum):
    Correct = "Correct"
    Suboptimal = "Suboptimal"
    Incorrect = "Incorrect"


class JudgeAction(str, Enum):
    Enhanced = "Enhanced"
    Overridden = "Overridden"


class MalformedResponse(RuntimeError):
    """Backend kept violating the response schema after all retries."""


class InformationLeak(AssertionError):
    """A prompt would expose more solution context than the role allows."""


class _SchemaViolation(ValueError):
    pass


@dataclass(frozen=True)
class HintPacket:
    """What a feedback agent is told about the optimal step.

    Tutor packets withhold the rule and parents; teacher/judge packets
    carry all three fields.
    """

    optimal_step: Formula
    rule: RuleId | None
    parents: tuple[Formula, ...] | None

    @staticmethod
    def for_tutor(optimal: Derivation) -> "HintPacket":
        return HintPacket(optimal.derived, None, None)

    @staticmethod
    def full(optimal: Derivation) -> "HintPacket":
        return HintPacket(optimal.derived, optimal.rule, optimal.parents)

    @property
    def withheld(self) -> bool:
        return self.rule is None and self.parents is None

    def derivation(self) -> Derivation:
        if self.rule is None or self.parents is None:
            raise InformationLeak("packet withholds the derivation context")
        return Derivation(self.optimal_step, self.rule, self.parents)


@dataclass(frozen=True)
class Candidate:
    step_text: str
    rationale: str


@dataclass(frozen=True)
class StudentResponse:
    candidates: tuple[Candidate, ...]
    reasoning: str
    next_step: Formula
    rule: RuleId
    parents: tuple[Formula, ...]
    raw: str = ""

    def __post_init__(self) -> None:
        if len(self.candidates) not in (2, 3):
            raise ValueError(f"expected 2-3 candidates, got {len(self.candidates)}")


@dataclass(frozen=True)
class FeedbackResponse:
    student_errors: str
    correctness_label: CorrectnessLabel
    feedback: str
    tutor_rule_predicted: RuleId | None = None
    raw: str = ""


@dataclass(frozen=True)
class JudgeResponse:
    student_errors: str
    correctness_label: CorrectnessLabel
    teacher_feedback_correctness: str
    judge_action: JudgeAction
    final_feedback: str
    raw: str = ""


@dataclass(frozen=True)
class RevisionResponse:
    revised_reasoning: str
    improved_step: Formula | None
    better_rule: RuleId | None
    parents: tuple[Formula, ...] | None
    raw: str = ""

    @property
    def no_improvement(self) -> bool:
        return self.improved_step is None


@dataclass(frozen=True)
class Transcript:
    """Verbatim messages and response of one agent call."""

    role: str
    messages: tuple[Message, ...]
    response: str
    retries: int


# ---------------------------------------------------------------------------
# Strict response parsing
# ---------------------------------------------------------------------------

def _json_object(text: str) -> dict:
    cleaned = text.strip()
    if cleaned.startswith("```"):
        cleaned = cleaned.strip("`")
        if cleaned.startswith("json"):
            cleaned = cleaned[4:]
    try:
        obj = json.loads(cleaned)
    except json.JSONDecodeError as exc:
        raise _SchemaViolation(f"response is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise _SchemaViolation("response must be a JSON object")
    return obj


def _check_fields(obj: dict, required: tuple[str, ...]) -> None:
    missing = [k for k in required if k not in obj]
    if missing:
        raise _SchemaViolation(f"missing required fields: {missing}")
    unknown = [k for k in obj if k not in required]
    if unknown:
        raise _SchemaViolation(f"unknown fields rejected: {unknown}")


def _formula(value, context: str) -> Formula:
    if not isinstance(value, str):
        raise _SchemaViolation(f"{context} must be a string")
    try:
        return parse(value)
    except ParseError as exc:
        raise _SchemaViolation(f"{context} is not a parseable formula: {exc}") from exc


def _rule(value, context: str) -> RuleId:
    try:
        return RuleId(value)
    except ValueError as exc:
        raise _SchemaViolation(f"{context} is not a known rule short name: {value!r}") from exc


def _string(value, context: str) -> str:
    if not isinstance(value, str) or not value.strip():
        raise _SchemaViolation(f"{context} must be a non-empty string")
    return value


def parse_student_response(text: str) -> StudentResponse:
    obj = _json_object(text)
    _check_fields(obj, ("CANDIDATES", "REASONING", "NEXT_STEP", "RULE", "PARENT_STATEMENTS"))
    raw_candidates = obj["CANDIDATES"]
    if not isinstance(raw_candidates, list) or not 2 <= len(raw_candidates) <= 3:
        raise _SchemaViolation("CANDIDATES must list 2-3 entries")
    candidates = []
    for c in raw_candidates:
        if not isinstance(c, dict) or set(c) != {"STEP", "RATIONALE"}:
            raise _SchemaViolation("each candidate needs exactly STEP and RATIONALE")
        candidates.append(Candidate(_string(c["STEP"], "STEP"), _string(c["RATIONALE"], "RATIONALE")))
    parents = obj["PARENT_STATEMENTS"]
    if not isinstance(parents, list) or not 1 <= len(parents) <= 2:
        raise _SchemaViolation("PARENT_STATEMENTS must list 1-2 statements")
    return StudentResponse(
        candidates=tuple(candidates),
        reasoning=_string(obj["REASONING"], "REASONING"),
        next_step=_formula(obj["NEXT_STEP"], "NEXT_STEP"),
        rule=_rule(obj["RULE"], "RULE"),
        parents=tuple(_formula(p, "PARENT_STATEMENTS") for p in parents),
        raw=text,
    )


def parse_feedback_response(text: str, role: str) -> FeedbackResponse:
    obj = _json_object(text)
    if role == "tutor":
        _check_fields(obj, ("STUDENT_ERRORS", "NEXT_STEP_CORRECTNESS", "TUTOR_RULE", "TUTOR_FEEDBACK"))
        feedback_key = "TUTOR_FEEDBACK"
        tutor_rule = _rule(obj["TUTOR_RULE"], "TUTOR_RULE")
    else:
        _check_fields(obj, ("STUDENT_ERRORS", "NEXT_STEP_CORRECTNESS", "TEACHER_FEEDBACK"))
        feedback_key = "TEACHER_FEEDBACK"
        tutor_rule = None
    try:
        label = CorrectnessLabel(obj["NEXT_STEP_CORRECTNESS"])
    except ValueError as exc:
        raise _SchemaViolation(f"bad NEXT_STEP_CORRECTNESS: {obj['NEXT_STEP_CORRECTNESS']!r}") from exc
    return FeedbackResponse(
        student_errors=_string(obj["STUDENT_ERRORS"], "STUDENT_ERRORS"),
        correctness_label=label,
        feedback=_string(obj[feedback_key], feedback_key),
        tutor_rule_predicted=tutor_rule,
        raw=text,
    )


def parse_judge_response(text: str) -> JudgeResponse:
    obj = _json_object(text)
    _check_fields(
        obj,
        (
            "STUDENT_ERRORS",
            "NEXT_STEP_CORRECTNESS",
            "TEACHER_FEEDBACK_CORRECTNESS",
            "JUDGE_ACTION",
            "FINAL_FEEDBACK",
        ),
    )
    try:
        label = CorrectnessLabel(obj["NEXT_STEP_CORRECTNESS"])
        action = JudgeAction(obj["JUDGE_ACTION"])
    except ValueError as exc:
        raise _SchemaViolation(f"bad enum value: {exc}") from exc
    return JudgeResponse(
        student_errors=_string(obj["STUDENT_ERRORS"], "STUDENT_ERRORS"),
        correctness_label=label,
        teacher_feedback_correctness=_string(
            obj["TEACHER_FEEDBACK_CORRECTNESS"], "TEACHER_FEEDBACK_CORRECTNESS"
        ),
        judge_action=action,
        final_feedback=_string(obj["FINAL_FEEDBACK"], "FINAL_FEEDBACK"),
        raw=text,
    )


def parse_revision_response(text: str) -> RevisionResponse:
    obj = _json_object(text)
    _check_fields(obj, ("REVISED_REASONING", "IMPROVED_STEP", "BETTER_RULE", "PARENT_STATEMENTS"))
    improved = obj["IMPROVED_STEP"]
    if improved == NO_IMPROVEMENT:
        return RevisionResponse(
            revised_reasoning=_string(obj["REVISED_REASONING"], "REVISED_REASONING"),
            improved_step=None,
            better_rule=None,
            parents=None,
            raw=text,
        )
    parents = obj["PARENT_STATEMENTS"]
    if obj["BETTER_RULE"] == NO_IMPROVEMENT or parents == NO_IMPROVEMENT:
        raise _SchemaViolation("a concrete IMPROVED_STEP needs a concrete rule and parents")
    if not isinstance(parents, list) or not 1 <= len(parents) <= 2:
        raise _SchemaViolation("PARENT_STATEMENTS must list 1-2 statements")
    return RevisionResponse(
        revised_reasoning=_string(obj["REVISED_REASONING"], "REVISED_REASONING"),
        improved_step=_formula(improved, "IMPROVED_STEP"),
        better_rule=_rule(obj["BETTER_RULE"], "BETTER_RULE"),
        parents=tuple(_formula(p, "PARENT_STATEMENTS") for p in parents),
        raw=text,
    )


# ---------------------------------------------------------------------------
# Agent calls with schema retry
# ---------------------------------------------------------------------------

def _call(backend: AgentBackend, role: str, messages: list[Message], parser):
    last_error: Exception | None = None
    for attempt in range(MAX_SCHEMA_RETRIES + 1):
        text = backend.complete(messages)
        if not text.strip():
            last_error = _SchemaViolation("zero-token output")
            continue
        try:
            parsed = parser(text)
        except _SchemaViolation as exc:
            last_error = exc
            continue
        return parsed, Transcript(role, tuple(messages), text, retries=attempt)
    raise MalformedResponse(
        f"{role} backend {backend.identity!r} failed after "
        f"{MAX_SCHEMA_RETRIES} retries: {last_error}"
    )


def run_student(backend: AgentBackend, state: ProofState) -> tuple[StudentResponse, Transcript]:
    messages = build_student_messages(state)
    return _call(backend, "student", messages, parse_student_response)


def run_feedback(
    role: str,
    backend: AgentBackend,
    state: ProofState,
    student: StudentResponse,
    hint: HintPacket,
) -> tuple[FeedbackResponse, Transcript]:
    """Run the tutor or teacher seat. Packet shape is enforced, not trusted."""
    if role == "tutor":
        if not hint.withheld:
            raise InformationLeak("tutor packets must withhold rule and parents")
        messages = build_tutor_messages(state, student, hint.optimal_step)
        violations = tutor_prompt_structure_violations(messages)
        if violations:
            raise InformationLeak("; ".join(violations))
    elif role == "teacher":
        messages = build_teacher_messages(state, student, hint.derivation())
    else:
        raise ValueError(f"unknown feedback role: {role}")
    return _call(backend, role, messages, lambda text: parse_feedback_response(text, role))


def run_judge(
    backend: AgentBackend,
    state: ProofState,
    student: StudentResponse,
    hint: HintPacket,
    upstream_feedback: FeedbackResponse,
) -> tuple[JudgeResponse, Transcript]:
    messages = build_judge_messages(
        state,
        student,
        hint.derivation(),
        upstream_feedback.correctness_label.value,
        upstream_feedback.feedback,
    )
    return _call(backend, "judge", messages, parse_judge_response)


def run_revision(
    backend: AgentBackend,
    state: ProofState,
    student: StudentResponse,
    feedback_label: CorrectnessLabel,
    feedback_text: str,
) -> tuple[RevisionResponse, Transcript]:
    messages = build_revision_messages(state, student, feedback_label.value, feedback_text)
    return _call(backend, "revision", messages, parse_revision_response)


# ---------------------------------------------------------------------------
# Full dialogue
# ---------------------------------------------------------------------------

@dataclass
class DialogueRecord:
    state_id: str
    pipeline: PipelineKind
    backend_ids: dict
    hint: HintPacket | None = None
    optimal_rule: RuleId | None = None
    student: StudentResponse | None = None
    feedback: FeedbackResponse | None = None
    judge: JudgeResponse | None = None
    revision: RevisionResponse | None = None
    pre_classification: StepClassification | None = None
    post_classification: StepClassification | None = None
    retries: int = 0
    review_flagged: bool = False
    failed: bool = False
    error: str | None = None
    transcripts: list = field(default_factory=list)


def default_state_id(state: ProofState) -> str:
    from .kg import key_string

    suffix = key_string(state.key())
    return f"{state.problem.id}:{suffix}" if suffix else state.problem.id


def run_pipeline(
    kind: PipelineKind,
    state: ProofState,
    kg: KnowledgeGraph,
    backends: dict,
    cached_student: StudentResponse | None = None,
    cached_upstream_feedback: FeedbackResponse | None = None,
    state_id: str | None = None,
) -> DialogueRecord:
    """Execute one dialogue: student -> hint -> feedback (-> judge) -> revision.

    The student response and the upstream feedback may be supplied from an
    earlier pipeline so that all kinds see identical inputs. Agent
    failures do not raise; the record carries partial progress with the
    failure flag set.
    """
    record = DialogueRecord(
        state_id=state_id if state_id is not None else default_state_id(state),
        pipeline=kind,
        backend_ids={role: b.identity for role, b in backends.items()},
    )
    try:
        optimal = optimal_steps(kg, state)[0]
        record.optimal_rule = optimal.rule
        record.hint = (
            HintPacket.for_tutor(optimal) if kind is PipelineKind.Tutor else HintPacket.full(optimal)
        )

        if cached_student is not None:
            student = cached_student
        else:
            student, t = run_student(backends["student"], state)
            record.transcripts.append(t)
        record.student = student
        record.pre_classification = classify_step(
            kg, state, student.next_step, student.rule, student.parents
        )

        if kind in (PipelineKind.Tutor, PipelineKind.Judge):
            upstream_role, upstream_packet = "tutor", HintPacket.for_tutor(optimal)
        else:
            upstream_role, upstream_packet = "teacher", HintPacket.full(optimal)
        if cached_upstream_feedback is not None:
            feedback = cached_upstream_feedback
        else:
            feedback, t = run_feedback(
                upstream_role, backends[upstream_role], state, student, upstream_packet
            )
            record.transcripts.append(t)
        record.feedback = feedback

        if kind in (PipelineKind.Judge, PipelineKind.TeacherJudge):
            judge, t = run_judge(backends["judge"], state, student, HintPacket.full(optimal), feedback)
            record.transcripts.append(t)
            record.judge = judge
            drive_label, drive_text = judge.correctness_label, judge.final_feedback
        else:
            drive_label, drive_text = feedback.correctness_label, feedback.feedback

        if drive_label is not CorrectnessLabel.Correct:
            revision, t = run_revision(backends["student"], state, student, drive_label, drive_text)
            record.transcripts.append(t)
            record.revision = revision

        if record.revision is not None and record.revision.improved_step is not None:
            record.post_classification = classify_step(
                kg,
                state,
                record.revision.improved_step,
                record.revision.better_rule,
                record.revision.parents,
            )
        else:
            record.post_classification = record.pre_classification
    except Exception as exc:  # noqa: BLE001 - partial progress is recorded
        record.failed = True
        record.error = f"{type(exc).__name__}: {exc}"

    record.retries = max((t.retries for t in record.transcripts), default=0)
    record.review_flagged = record.failed or record.retries >= MAX_SCHEMA_RETRIES
    return record


# ---------------------------------------------------------------------------
# Record serialization (JSONL-friendly dicts; formulas in canonical ascii)
# ---------------------------------------------------------------------------

def _opt_render(f: Formula | None) -> str | None:
    return None if f is None else render(f)


def _opt_parse(s: str | None) -> Formula | None:
    return None if s is None else parse(s)


def student_to_dict(s: StudentResponse) -> dict:
    return {
        "candidates": [{"step": c.step_text, "rationale": c.rationale} for c in s.candidates],
        "reasoning": s.reasoning,
        "next_step": render(s.next_step),
        "rule": s.rule.value,
        "parents": [render(p) for p in s.parents],
        "raw": s.raw,
    }


def student_from_dict(d: dict) -> StudentResponse:
    return StudentResponse(
        candidates=tuple(Candidate(c["step"], c["rationale"]) for c in d["candidates"]),
        reasoning=d["reasoning"],
        next_step=parse(d["next_step"]),
        rule=RuleId(d["rule"]),
        parents=tuple(parse(p) for p in d["parents"]),
        raw=d["raw"],
    )


def record_to_dict(r: DialogueRecord) -> dict:
    return {
        "state_id": r.state_id,
        "pipeline": r.pipeline.value,
        "backend_ids": dict(r.backend_ids),
        "optimal_rule": None if r.optimal_rule is None else r.optimal_rule.value,
        "hint": None
        if r.hint is None
        else {
            "optimal_step": render(r.hint.optimal_step),
            "rule": None if r.hint.rule is None else r.hint.rule.value,
            "parents": None if r.hint.parents is None else [render(p) for p in r.hint.parents],
        },
        "student": None if r.student is None else student_to_dict(r.student),
        "feedback": None
        if r.feedback is None
        else {
            "student_errors": r.feedback.student_errors,
            "correctness_label": r.feedback.correctness_label.value,
            "feedback": r.feedback.feedback,
            "tutor_rule_predicted": None
            if r.feedback.tutor_rule_predicted is None
            else r.feedback.tutor_rule_predicted.value,
            "raw": r.feedback.raw,
        },
        "judge": None
        if r.judge is None
        else {
            "student_errors": r.judge.student_errors,
            "correctness_label": r.judge.correctness_label.value,
            "teacher_feedback_correctness": r.judge.teacher_feedback_correctness,
            "judge_action": r.judge.judge_action.value,
            "final_feedback": r.judge.final_feedback,
            "raw": r.judge.raw,
        },
        "revision": None
        if r.revision is None
        else {
            "revised_reasoning": r.revision.revised_reasoning,
            "improved_step": _opt_render(r.revision.improved_step),
            "better_rule": None if r.revision.better_rule is None else r.revision.better_rule.value,
            "parents": None
            if r.revision.parents is None
            else [render(p) for p in r.revision.parents],
            "raw": r.revision.raw,
        },
        "pre_classification": None
        if r.pre_classification is None
        else r.pre_classification.to_dict(),
        "post_classification": None
        if r.post_classification is None
        else r.post_classification.to_dict(),
        "retries": r.retries,
        "review_flagged": r.review_flagged,
        "failed": r.failed,
        "error": r.error,
        "transcripts": [
            {
                "role": t.role,
                "messages": [dict(m) for m in t.messages],
                "response": t.response,
                "retries": t.retries,
            }
            for t in r.transcripts
        ],
    }


def record_from_dict(d: dict) -> DialogueRecord:
    hint = d["hint"]
    feedback = d["feedback"]
    judge = d["judge"]
    revision = d["revision"]
    return DialogueRecord(
        state_id=d["state_id"],
        pipeline=PipelineKind(d["pipeline"]),
        backend_ids=dict(d["backend_ids"]),
        optimal_rule=None if d["optimal_rule"] is None else RuleId(d["optimal_rule"]),
        hint=None
        if hint is None
        else HintPacket(
            parse(hint["optimal_step"]),
            None if hint["rule"] is None else RuleId(hint["rule"]),
            None if hint["parents"] is None else tuple(parse(p) for p in hint["parents"]),
        ),
        student=None if d["student"] is None else student_from_dict(d["student"]),
        feedback=None
        if feedback is None
        else FeedbackResponse(
            student_errors=feedback["student_errors"],
            correctness_label=CorrectnessLabel(feedback["correctness_label"]),
            feedback=feedback["feedback"],
            tutor_rule_predicted=None
            if feedback["tutor_rule_predicted"] is None
            else RuleId(feedback["tutor_rule_predicted"]),
            raw=feedback["raw"],
        ),
        judge=None
        if judge is None
        else JudgeResponse(
            student_errors=judge["student_errors"],
            correctness_label=CorrectnessLabel(judge["correctness_label"]),
            teacher_feedback_correctness=judge["teacher_feedback_correctness"],
            judge_action=JudgeAction(judge["judge_action"]),
            final_feedback=judge["final_feedback"],
            raw=judge["raw"],
        ),
        revision=None
        if revision is None
        else RevisionResponse(
            revised_reasoning=revision["revised_reasoning"],
            improved_step=_opt_parse(revision["improved_step"]),
            better_rule=None if revision["better_rule"] is None else RuleId(revision["better_rule"]),
            parents=None
            if revision["parents"] is None
            else tuple(parse(p) for p in revision["parents"]),
            raw=revision["raw"],
        ),
        pre_classification=None
        if d["pre_classification"] is None
        else StepClassification.from_dict(d["pre_classification"]),
        post_classification=None
        if d["post_classification"] is None
        else StepClassification.from_dict(d["post_classification"]),
        retries=d["retries"],
        review_flagged=d["review_flagged"],
        failed=d["failed"],
        error=d["error"],
        transcripts=[
            Transcript(
                role=t["role"],
                messages=tuple(t["messages"]),
                response=t["response"],
                retries=t["retries"],
            )
            for t in d["transcripts"]
        ],
    )
