"""Prompt templates and payload builders for the tutoring agents.

Prompts are data: each agent gets a fixed system template plus a user
message whose machine-readable core is a single JSON object. Information
access is controlled entirely by which fields the payload builder
includes, which is what the leak audit inspects:

* student sees the proof state only;
* tutor sees the state, the optimal next statement, and the student's
  candidates/reasoning/step (never the student's claimed rule or parents,
  and never the derivation behind the hint);
* teacher and judge see the state, the full derivation context, and the
  complete student response; the judge also sees the feedback under
  review.
"""

from __future__ import annotations

import json
import re

from .formula import Formula, render
from .rules import Derivation, RuleId

__all__ = [
    "PROMPT_VERSION",
    "Message",
    "STUDENT_SYSTEM",
    "STUDENT_UPDATE_SYSTEM",
    "TUTOR_SYSTEM",
    "TEACHER_SYSTEM",
    "JUDGE_SYSTEM",
    "NO_IMPROVEMENT",
    "build_student_messages",
    "build_tutor_messages",
    "build_teacher_messages",
    "build_judge_messages",
    "build_revision_messages",
    "payload_of",
    "audit_tutor_messages",
    "RULE_TOKEN_RE",
]

PROMPT_VERSION = "1"

Message = dict  # {"role": "system" | "user", "content": str}

NO_IMPROVEMENT = "No Improvement Needed"

STUDENT_SYSTEM = """\
You are a student in an undergraduate discrete structures course working on a
propositional logic proof. Propose the single next step that most directly
advances the proof from the given statements toward the conclusion.

Do this:
1. Study the givens and the intermediate steps already derived.
2. Propose 2-3 candidate next steps, each with a brief rationale.
3. Pick the candidate that advances most directly toward the conclusion.
4. Report the chosen step in symbolic notation, the inference rule you
   applied (short name, e.g. MP, MT, Conj, DS), and the parent statements
   it was derived from (write the statements themselves, not line numbers).

Respond with a single JSON object containing exactly these fields:
  "CANDIDATES": list of 2-3 objects, each {"STEP": "...", "RATIONALE": "..."}
  "REASONING": why the selected step is the best choice
  "NEXT_STEP": the chosen step, symbolic notation only
  "RULE": inference rule short name
  "PARENT_STATEMENTS": list of the parent statements used
"""

STUDENT_UPDATE_SYSTEM = """\
You are a student revising your previous next-step attempt on a
propositional logic proof after receiving feedback.

Do this:
1. Read the feedback and decide whether it identifies an actual error.
2. If your previous response needs no change, answer with the marker
   "No Improvement Needed".
3. Otherwise propose exactly one improved next step. Revise only the
   immediate next step; do not extend the proof further.

Respond with a single JSON object containing exactly these fields:
  "REVISED_REASONING": brief reflection, or "No Improvement Needed"
  "IMPROVED_STEP": symbolic step, or "No Improvement Needed"
  "BETTER_RULE": inference rule short name, or "No Improvement Needed"
  "PARENT_STATEMENTS": list of parent statements, or "No Improvement Needed"
"""

TUTOR_SYSTEM = """\
You are a tutor reviewing a student's proposed next step in a propositional
logic proof. You are given the correct next statement, but not how it is
derived: work out for yourself which rule and parent statements produce it
before judging the student.

Do this:
1. Privately reconstruct how the given next statement follows from the
   available statements, and name the inference rule you believe applies.
2. Evaluate the student's candidates, reasoning, and chosen step.
3. Classify the student's step as Correct, Suboptimal, or Incorrect.
4. Write brief scaffolded feedback (2-3 sentences). Acknowledge what the
   student did well, then guide with a question. Never state the correct
   next statement, name the rule that produces it, or point at the exact
   statements it is derived from.

Respond with a single JSON object containing exactly these fields:
  "STUDENT_ERRORS": brief description of errors, or "Correct"
  "NEXT_STEP_CORRECTNESS": "Correct" / "Suboptimal" / "Incorrect"
  "TUTOR_RULE": the inference rule you reconstructed for the correct step
  "TUTOR_FEEDBACK": the scaffolded feedback text
"""

TEACHER_SYSTEM = """\
You are a teacher reviewing a student's proposed next step in a
propositional logic proof. You are given the knowledge-base solution for
this state: the correct next statement together with the inference rule and
parent statements that derive it.

Do this:
1. Compare the student's response with the knowledge-base step.
2. Identify errors in the student's logic, rule usage, or parents.
3. Classify the student's step as Correct, Suboptimal, or Incorrect.
4. Write brief scaffolded feedback (2-3 sentences). Acknowledge what the
   student did well, guide with a question, and do not quote the correct
   statement, rule, or parents outright.

Respond with a single JSON object containing exactly these fields:
  "STUDENT_ERRORS": brief description of errors, or "Correct"
  "NEXT_STEP_CORRECTNESS": "Correct" / "Suboptimal" / "Incorrect"
  "TEACHER_FEEDBACK": the scaffolded feedback text
"""

JUDGE_SYSTEM = """\
You are a reviewing judge for a propositional logic tutoring system. You are
given the knowledge-base solution for this state (correct next statement,
rule, parents), the student's response, and the feedback another agent has
already written for the student.

Do this:
1. Independently classify the student's step as Correct, Suboptimal, or
   Incorrect using the knowledge-base solution.
2. Assess whether the existing feedback is accurate, specific, and free of
   answer leakage.
3. If the feedback is sound, enhance it; if it is wrong, misleading, vague,
   or reveals the solution, override it with corrected guidance.
4. Keep the final feedback to 2-3 encouraging sentences that scaffold
   rather than reveal; do not quote the correct statement, rule, or parents.

Respond with a single JSON object containing exactly these fields:
  "STUDENT_ERRORS": brief description of errors, or "Correct"
  "NEXT_STEP_CORRECTNESS": "Correct" / "Suboptimal" / "Incorrect"
  "TEACHER_FEEDBACK_CORRECTNESS": your assessment of the reviewed feedback
  "JUDGE_ACTION": "Enhanced" or "Overridden"
  "FINAL_FEEDBACK": the approved feedback text
"""

_USER_PREAMBLE = "Here is the problem instance.\n\nINPUT:\n"


def _user_message(payload: dict) -> Message:
    return {
        "role": "user",
        "content": _USER_PREAMBLE + json.dumps(payload, indent=2, ensure_ascii=True),
    }


def payload_of(messages: list[Message]) -> dict:
    """Recover the JSON payload from a built user message."""
    content = messages[-1]["content"]
    return json.loads(content[content.index("{"):])


def _state_fields(state, annotated: bool) -> dict:
    fields: dict = {"GIVENS": [render(p) for p in state.problem.premises]}
    if annotated:
        fields["INTERMEDIATE_STEPS"] = [
            {
                "STATEMENT": render(d.derived),
                "RULE": d.rule.value,
                "PARENT_STATEMENTS": [render(p) for p in d.parents],
            }
            for d in state.intermediates
        ]
    else:
        fields["INTERMEDIATE_STEPS"] = [render(d.derived) for d in state.intermediates]
    fields["CONCLUSION"] = render(state.problem.conclusion)
    return fields


def _student_fields(student, include_derivation: bool) -> dict:
    fields: dict = {
        "CANDIDATES": [
            {"STEP": c.step_text, "RATIONALE": c.rationale} for c in student.candidates
        ],
        "REASONING": student.reasoning,
        "NEXT_STEP": render(student.next_step),
    }
    if include_derivation:
        fields["RULE"] = student.rule.value
        fields["PARENT_STATEMENTS"] = [render(p) for p in student.parents]
    return fields


def build_student_messages(state) -> list[Message]:
    return [
        {"role": "system", "content": STUDENT_SYSTEM},
        _user_message(_state_fields(state, annotated=True)),
    ]


def build_tutor_messages(state, student, hint_statement: Formula) -> list[Message]:
    payload = _state_fields(state, annotated=False)
    payload["HINT"] = {"NEXT_STEP": render(hint_statement)}
    payload["STUDENT_RESPONSE"] = _student_fields(student, include_derivation=False)
    return [{"role": "system", "content": TUTOR_SYSTEM}, _user_message(payload)]


def build_teacher_messages(state, student, hint: Derivation) -> list[Message]:
    payload = _state_fields(state, annotated=True)
    payload["KNOWLEDGE_BASE_STEPS"] = {
        "NEXT_STEP": render(hint.derived),
        "RULE": hint.rule.value,
        "PARENT_STATEMENTS": [render(p) for p in hint.parents],
    }
    payload["STUDENT_RESPONSE"] = _student_fields(student, include_derivation=True)
    return [{"role": "system", "content": TEACHER_SYSTEM}, _user_message(payload)]


def build_judge_messages(
    state, student, hint: Derivation, upstream_label: str, upstream_text: str
) -> list[Message]:
    payload = _state_fields(state, annotated=True)
    payload["KNOWLEDGE_BASE_STEPS"] = {
        "NEXT_STEP": render(hint.derived),
        "RULE": hint.rule.value,
        "PARENT_STATEMENTS": [render(p) for p in hint.parents],
    }
    payload["STUDENT_RESPONSE"] = _student_fields(student, include_derivation=True)
    payload["FEEDBACK_UNDER_REVIEW"] = {
        "NEXT_STEP_CORRECTNESS": upstream_label,
        "TEXT": upstream_text,
    }
    return [{"role": "system", "content": JUDGE_SYSTEM}, _user_message(payload)]


def build_revision_messages(state, student, feedback_label: str, feedback_text: str) -> list[Message]:
    payload = _state_fields(state, annotated=True)
    payload["YOUR_PREVIOUS_RESPONSE"] = _student_fields(student, include_derivation=True)
    payload["FEEDBACK"] = {"LABEL": feedback_label, "TEXT": feedback_text}
    return [{"role": "system", "content": STUDENT_UPDATE_SYSTEM}, _user_message(payload)]


# ---------------------------------------------------------------------------
# Information-access audit
# ---------------------------------------------------------------------------

RULE_TOKEN_RE = re.compile(
    r"\b(" + "|".join(sorted((r.value for r in RuleId), key=len, reverse=True)) + r")\b"
)


def tutor_prompt_structure_violations(messages: list[Message]) -> list[str]:
    """Structural leak checks safe to enforce on every live tutor prompt."""
    violations: list[str] = []
    payload = payload_of(messages)
    hint = payload.get("HINT")
    if not isinstance(hint, dict) or set(hint) != {"NEXT_STEP"}:
        violations.append(f"hint object must contain exactly NEXT_STEP, got {hint!r}")
    student = payload.get("STUDENT_RESPONSE", {})
    for forbidden in ("RULE", "PARENT_STATEMENTS"):
        if forbidden in student:
            violations.append(f"student section exposes {forbidden}")
    if any(isinstance(x, dict) for x in payload.get("INTERMEDIATE_STEPS", [])):
        violations.append("intermediates carry derivation annotations")
    if "KNOWLEDGE_BASE_STEPS" in payload:
        violations.append("knowledge-base derivation context present")
    return violations


def audit_tutor_messages(messages: list[Message], optimal: Derivation | None = None) -> list[str]:
    """String-level no-leak audit of a tutor prompt. Returns violations.

    On top of the structural checks, scans the whole prompt for rule
    short-name tokens and (when the optimal derivation is given) for its
    parent renderings inside the hint section. Free-text rule mentions by
    a live student would trip the token scan, so this full audit runs
    over scripted corpora; live calls enforce the structural subset.
    """
    violations = tutor_prompt_structure_violations(messages)
    for m in messages:
        hit = RULE_TOKEN_RE.search(m["content"])
        if hit:
            violations.append(f"rule token {hit.group(0)!r} in {m['role']} message")
    if optimal is not None:
        payload = payload_of(messages)
        hint = payload.get("HINT")
        if isinstance(hint, dict):
            hint_text = json.dumps(hint)
            for p in optimal.parents:
                if render(p) in hint_text:
                    violations.append(f"hint section renders parent {render(p)!r}")
    return violations
