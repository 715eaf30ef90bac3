"""Deterministic scripted agents for offline runs and tests.

Each script reads only the JSON payload of its prompt, exactly the
information the corresponding role is allowed to see, and emits a
schema-valid JSON response that is a pure function of that payload. The
student deliberately carries a classic misconception (it reports MP
whenever it actually used MT) so that justification failures, wrong-rule
echoes, and judge overrides all occur in scripted corpora.
"""

from __future__ import annotations

import json

from .backends import ScriptedBackend
from .complexity import step_complexity
from .formula import Formula, parse, render, subformulas
from .prompts import NO_IMPROVEMENT
from .rules import Derivation, EnumerationConfig, RuleId, applicable_derivations

__all__ = ["scripted_backends", "ScriptedBackend"]


def _payload(messages: list[dict]) -> dict:
    content = messages[-1]["content"]
    return json.loads(content[content.index("{"):])


def _statements(payload: dict) -> tuple[list[Formula], list[Formula], Formula]:
    givens = [parse(s) for s in payload["GIVENS"]]
    inters = []
    for item in payload["INTERMEDIATE_STEPS"]:
        inters.append(parse(item["STATEMENT"] if isinstance(item, dict) else item))
    conclusion = parse(payload["CONCLUSION"])
    return givens, inters, conclusion


def _enumeration_config(statements: list[Formula], conclusion: Formula) -> EnumerationConfig:
    vocab: set[Formula] = set()
    for f in [*statements, conclusion]:
        vocab.update(subformulas(f))
    return EnumerationConfig(addition_vocabulary=frozenset(vocab))


def _derivations(payload: dict) -> tuple[list[Derivation], list[Formula], Formula]:
    givens, inters, conclusion = _statements(payload)
    statements = [*givens, *inters]
    config = _enumeration_config(statements, conclusion)
    return applicable_derivations(frozenset(statements), config), statements, conclusion


def _pick_key(d: Derivation):
    return (step_complexity(d.derived), render(d.derived), d.rule.value)


def _relevance_key(d: Derivation, vocab: frozenset):
    return (d.derived not in vocab, step_complexity(d.derived), render(d.derived), d.rule.value)


_MISREPORT = {RuleId.MT: RuleId.MP}


def _student(messages: list[dict]) -> str:
    payload = _payload(messages)
    derivations, statements, conclusion = _derivations(payload)
    ranked = sorted(derivations, key=_pick_key)
    if not ranked:
        return json.dumps({"CANDIDATES": [], "REASONING": "stuck", "NEXT_STEP": "",
                           "RULE": "", "PARENT_STATEMENTS": []})
    pick = ranked[0]
    candidates = []
    for d in ranked[:3]:
        candidates.append(
            {
                "STEP": render(d.derived),
                "RATIONALE": "one application away from the listed statements",
            }
        )
    while len(candidates) < 2:
        candidates.append(
            {
                "STEP": render(conclusion),
                "RATIONALE": "the conclusion itself, if it were directly derivable",
            }
        )
    claimed = _MISREPORT.get(pick.rule, pick.rule)
    return json.dumps(
        {
            "CANDIDATES": candidates,
            "REASONING": "the chosen statement is the simplest one reachable in a single "
            "application and keeps the derivation moving toward the conclusion",
            "NEXT_STEP": render(pick.derived),
            "RULE": claimed.value,
            "PARENT_STATEMENTS": [render(p) for p in pick.parents],
        },
        indent=1,
    )


def _tutor(messages: list[dict]) -> str:
    payload = _payload(messages)
    derivations, statements, _ = _derivations(payload)
    hint = parse(payload["HINT"]["NEXT_STEP"])
    student_step = parse(payload["STUDENT_RESPONSE"]["NEXT_STEP"])
    producers = sorted((d for d in derivations if d.derived == hint), key=lambda d: d.rule.value)
    inferred = producers[0].rule if producers else RuleId.MP
    derivable = {d.derived for d in derivations}
    if student_step == hint:
        label, errors = "Correct", "Correct"
        feedback = (
            "Nicely done, that statement is exactly the move this proof needs. "
            "Your reading of the available statements is sound. "
            "Keep asking which line brings you closest to the conclusion."
        )
    elif student_step in derivable:
        label, errors = "Suboptimal", "The proposed statement does not advance toward the conclusion."
        feedback = (
            "Your step does follow from what you have, which shows careful reading. "
            "Ask yourself whether it brings the conclusion any closer, though. "
            "Which single statement would you still need right before finishing?"
        )
    else:
        label, errors = "Incorrect", "The proposed statement does not follow in one application."
        feedback = (
            "You are engaging with the right statements, which is a good start. "
            "Check whether your step really follows in a single application from the lines you cited. "
            "What shape does a statement need for the move you attempted?"
        )
    return json.dumps(
        {
            "STUDENT_ERRORS": errors,
            "NEXT_STEP_CORRECTNESS": label,
            "TUTOR_RULE": inferred.value,
            "TUTOR_FEEDBACK": feedback,
        },
        indent=1,
    )


def _assess_with_solution(payload: dict) -> tuple[str, str]:
    kb = payload["KNOWLEDGE_BASE_STEPS"]
    optimal_step = parse(kb["NEXT_STEP"])
    optimal_rule = RuleId(kb["RULE"])
    optimal_parents = {parse(p) for p in kb["PARENT_STATEMENTS"]}
    sr = payload["STUDENT_RESPONSE"]
    student_step = parse(sr["NEXT_STEP"])
    student_rule = RuleId(sr["RULE"])
    student_parents = {parse(p) for p in sr["PARENT_STATEMENTS"]}
    if student_step == optimal_step:
        if student_rule == optimal_rule and student_parents == optimal_parents:
            return "Correct", "Correct"
        return (
            "Incorrect",
            "The statement matches the expected step but the cited rule or parents do not derive it.",
        )
    derivations, _, _ = _derivations(payload)
    if any(d.derived == student_step for d in derivations):
        return "Suboptimal", "The step is derivable but does not shorten the path to the conclusion."
    return "Incorrect", "The step is not a valid single application from the current statements."


def _teacher(messages: list[dict]) -> str:
    payload = _payload(messages)
    label, errors = _assess_with_solution(payload)
    if label == "Correct":
        feedback = (
            "Exactly right, and your justification lines up with the derivation. "
            "You identified both the statement and the reasoning behind it. "
            "Carry the same discipline into the remaining steps."
        )
    elif label == "Suboptimal":
        feedback = (
            "Your step is valid, so your reading of the statements is solid. "
            "It does not move the proof forward, though. "
            "Which available line shares structure with the conclusion you are after?"
        )
    else:
        feedback = (
            "You engaged with relevant statements, which is the right instinct. "
            "Revisit how your cited lines combine: the move you named does not produce that statement. "
            "What would the lines you cited actually yield in one application?"
        )
    return json.dumps(
        {
            "STUDENT_ERRORS": errors,
            "NEXT_STEP_CORRECTNESS": label,
            "TEACHER_FEEDBACK": feedback,
        },
        indent=1,
    )


def _judge(messages: list[dict]) -> str:
    payload = _payload(messages)
    label, errors = _assess_with_solution(payload)
    reviewed = payload["FEEDBACK_UNDER_REVIEW"]
    if reviewed["NEXT_STEP_CORRECTNESS"] == label:
        action = "Enhanced"
        verdict = "Correct"
        final = (
            reviewed["TEXT"]
            + " Before you continue, say in one sentence why this move is the right one."
        )
    else:
        action = "Overridden"
        verdict = "Incorrect"
        if label == "Correct":
            final = (
                "Your proposed statement and its justification are exactly right. "
                "Disregard any doubts about it and move on. "
                "What does the proof still need after this step?"
            )
        elif label == "Suboptimal":
            final = (
                "Good instinct: your step does follow from the lines you used. "
                "It will not bring the conclusion closer, however. "
                "Which statement would let you act on the conclusion directly?"
            )
        else:
            final = (
                "You picked promising lines to work with, so you are close. "
                "The move you named does not produce that statement from those lines. "
                "Look again at what those lines license in one application."
            )
    return json.dumps(
        {
            "STUDENT_ERRORS": errors,
            "NEXT_STEP_CORRECTNESS": label,
            "TEACHER_FEEDBACK_CORRECTNESS": verdict,
            "JUDGE_ACTION": action,
            "FINAL_FEEDBACK": final,
        },
        indent=1,
    )


def _revision(messages: list[dict]) -> str:
    payload = _payload(messages)
    if payload["FEEDBACK"]["LABEL"] == "Correct":
        return json.dumps(
            {
                "REVISED_REASONING": NO_IMPROVEMENT,
                "IMPROVED_STEP": NO_IMPROVEMENT,
                "BETTER_RULE": NO_IMPROVEMENT,
                "PARENT_STATEMENTS": NO_IMPROVEMENT,
            },
            indent=1,
        )
    givens, inters, conclusion = _statements(payload)
    statements = [*givens, *inters]
    config = _enumeration_config(statements, conclusion)
    derivations = applicable_derivations(frozenset(statements), config)
    vocab: set[Formula] = set()
    for f in [*givens, conclusion]:
        vocab.update(subformulas(f))
    previous = parse(payload["YOUR_PREVIOUS_RESPONSE"]["NEXT_STEP"])
    ranked = sorted(derivations, key=lambda d: _relevance_key(d, frozenset(vocab)))
    choice = next((d for d in ranked if d.derived != previous), ranked[0] if ranked else None)
    if choice is None:
        return json.dumps(
            {
                "REVISED_REASONING": NO_IMPROVEMENT,
                "IMPROVED_STEP": NO_IMPROVEMENT,
                "BETTER_RULE": NO_IMPROVEMENT,
                "PARENT_STATEMENTS": NO_IMPROVEMENT,
            },
            indent=1,
        )
    return json.dumps(
        {
            "REVISED_REASONING": "the feedback points away from my first pick, so I am "
            "choosing the simplest derivable statement that appears in the problem itself",
            "IMPROVED_STEP": render(choice.derived),
            "BETTER_RULE": choice.rule.value,
            "PARENT_STATEMENTS": [render(p) for p in choice.parents],
        },
        indent=1,
    )


_SCRIPTS = {
    "student": _student,
    "tutor": _tutor,
    "teacher": _teacher,
    "judge": _judge,
}


def scripted_backends(identity_prefix: str = "scripted") -> dict:
    """The full deterministic agent roster keyed by role.

    The student seat answers both the initial prompt and the revision
    prompt (it distinguishes them by payload shape).
    """

    def student_script(messages: list[dict]) -> str:
        payload = _payload(messages)
        if "FEEDBACK" in payload:
            return _revision(messages)
        return _student(messages)

    backends = {"student": ScriptedBackend(f"{identity_prefix}-student", student_script)}
    for role in ("tutor", "teacher", "judge"):
        backends[role] = ScriptedBackend(f"{identity_prefix}-{role}", _SCRIPTS[role])
    return backends
