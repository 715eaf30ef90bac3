"""Evaluation metrics over pipeline results.

Covers the six headline measures: pre/post accuracy with learning gain,
tutor rule accuracy, mean complexity of improved instances, unique
improvement count with complexity gap, and complexity-bucket breakdowns.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass

from .complexity import ComplexityConstants, DEFAULT_CONSTANTS, step_complexity
from .formula import Formula
from .rules import RuleId

__all__ = [
    "ComplexityConstants",
    "DEFAULT_CONSTANTS",
    "step_complexity",
    "PipelineResult",
    "EmptyInput",
    "MisalignedInputs",
    "UniqueImprovement",
    "BucketRow",
    "DEFAULT_BUCKET_EDGES",
    "learning_gain",
    "accuracy",
    "rule_accuracy",
    "mean_improved_complexity",
    "unique_improvement_count",
    "bucket_report",
    "table_report",
    "report_to_csv",
    "report_to_json",
]


class EmptyInput(ValueError):
    pass


class MisalignedInputs(ValueError):
    pass


@dataclass(frozen=True)
class PipelineResult:
    """Per-state outcome of one pipeline run, the unit all metrics consume."""

    state_id: str
    pipeline: str
    pre_correct: bool
    post_correct: bool
    optimal_rule: RuleId
    optimal_step_complexity: float
    predicted_step: Formula | None = None
    tutor_rule_predicted: RuleId | None = None


def learning_gain(pre_accuracy: float, post_accuracy: float) -> float:
    """Post minus pre, in percentage points."""
    for v in (pre_accuracy, post_accuracy):
        if not 0.0 <= v <= 100.0:
            raise ValueError(f"accuracy must be within [0, 100], got {v}")
    return post_accuracy - pre_accuracy


def accuracy(flags: list[bool]) -> float:
    if not flags:
        raise EmptyInput("no results")
    return 100.0 * sum(flags) / len(flags)


def rule_accuracy(results: list[PipelineResult]) -> float:
    """Share of results whose tutor-predicted rule matches the optimal rule."""
    if not results:
        raise EmptyInput("no results")
    missing = [r.state_id for r in results if r.tutor_rule_predicted is None]
    if missing:
        raise ValueError(f"results without a tutor rule prediction: {missing[:5]}")
    hits = sum(r.tutor_rule_predicted == r.optimal_rule for r in results)
    return 100.0 * hits / len(results)


def mean_improved_complexity(results: list[PipelineResult]) -> float | None:
    """Mean optimal-step complexity over results the pipeline improved.

    Improved means pre incorrect and post correct. None when no result
    qualifies.
    """
    improved = [r.optimal_step_complexity for r in results if r.post_correct and not r.pre_correct]
    if not improved:
        return None
    return sum(improved) / len(improved)


@dataclass(frozen=True)
class UniqueImprovement:
    count: int
    mean_gap: float | None


def unique_improvement_count(
    judge: list[PipelineResult],
    teacher: list[PipelineResult],
    constants: ComplexityConstants = DEFAULT_CONSTANTS,
) -> UniqueImprovement:
    """States where only the Judge pipeline succeeds, plus the complexity gap.

    Both lists must cover the same state-id multiset (identical student
    inputs). The gap is predicted minus optimal step complexity of the
    teacher-pipeline prediction, averaged over the uniquely improved
    states.
    """
    if Counter(r.state_id for r in judge) != Counter(r.state_id for r in teacher):
        raise MisalignedInputs("judge and teacher results cover different state ids")
    judge_by_id = {r.state_id: r for r in judge}
    teacher_by_id = {r.state_id: r for r in teacher}
    unique_ids = [
        sid
        for sid, jr in judge_by_id.items()
        if jr.post_correct and not teacher_by_id[sid].post_correct
    ]
    gaps = []
    for sid in unique_ids:
        tr = teacher_by_id[sid]
        if tr.predicted_step is not None:
            gaps.append(step_complexity(tr.predicted_step, constants) - tr.optimal_step_complexity)
    mean_gap = sum(gaps) / len(gaps) if gaps else None
    return UniqueImprovement(count=len(unique_ids), mean_gap=mean_gap)


DEFAULT_BUCKET_EDGES = (2.5, 4.0, 4.5)


@dataclass(frozen=True)
class BucketRow:
    bucket: str
    n: int
    post_accuracy: float | None


def bucket_report(
    results: list[PipelineResult], edges: tuple[float, ...] = DEFAULT_BUCKET_EDGES
) -> list[BucketRow]:
    """Post accuracy partitioned by optimal-step complexity.

    Buckets are half-open: below the first edge, then [e_i, e_{i+1}),
    then at or above the last edge.
    """
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError("bucket edges must be strictly increasing")
    labels = [f"<{edges[0]}"]
    labels += [f"{a}-{b}" for a, b in zip(edges, edges[1:])]
    labels += [f">={edges[-1]}"]
    buckets: list[list[PipelineResult]] = [[] for _ in labels]
    for r in results:
        c = r.optimal_step_complexity
        idx = sum(c >= e for e in edges)
        buckets[idx].append(r)
    rows = []
    for label, members in zip(labels, buckets):
        post = accuracy([m.post_correct for m in members]) if members else None
        rows.append(BucketRow(bucket=label, n=len(members), post_accuracy=post))
    return rows


# ---------------------------------------------------------------------------
# Report assembly (one row per model/backend batch, headline-table shaped)
# ---------------------------------------------------------------------------

PIPELINE_ORDER = ("Tutor", "Teacher", "Judge", "TeacherJudge")


def table_report(
    results_by_pipeline: dict[str, list[PipelineResult]], label: str = "run"
) -> dict:
    """Headline columns: Pre, Rule Acc., Post per pipeline, deltas, mean
    complexity per pipeline, UIC and Gap (Judge vs Teacher).

    The delta is reported per pipeline plus once for the best pipeline.
    """
    if not results_by_pipeline:
        raise EmptyInput("no results")
    any_results = next(iter(results_by_pipeline.values()))
    pre = accuracy([r.pre_correct for r in any_results])
    row: dict = {"Model": label, "Pre": round(pre, 2)}
    tutor_results = results_by_pipeline.get("Tutor")
    if tutor_results and all(r.tutor_rule_predicted is not None for r in tutor_results):
        row["Rule Acc."] = round(rule_accuracy(tutor_results), 2)
    else:
        row["Rule Acc."] = None
    best_post: float | None = None
    for kind in PIPELINE_ORDER:
        results = results_by_pipeline.get(kind)
        if not results:
            continue
        post = accuracy([r.post_correct for r in results])
        row[f"Post ({kind})"] = round(post, 2)
        row[f"Δ pp ({kind})"] = round(learning_gain(pre, post), 2)
        mic = mean_improved_complexity(results)
        row[f"Mean Complexity ({kind})"] = round(mic, 2) if mic is not None else None
        if best_post is None or post > best_post:
            best_post = post
    row["Δ pp (best)"] = round(learning_gain(pre, best_post), 2) if best_post is not None else None
    judge = results_by_pipeline.get("Judge")
    teacher = results_by_pipeline.get("Teacher")
    if judge and teacher:
        uic = unique_improvement_count(judge, teacher)
        row["UIC"] = uic.count
        row["Gap"] = round(uic.mean_gap, 2) if uic.mean_gap is not None else None
    else:
        row["UIC"] = None
        row["Gap"] = None
    return row


def report_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    fieldnames: list[str] = []
    for row in rows:
        for k in row:
            if k not in fieldnames:
                fieldnames.append(k)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames)
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return buf.getvalue()


def report_to_json(rows: list[dict]) -> str:
    return json.dumps(rows, indent=2) + "\n"


def results_from_records(
    records: list, constants: ComplexityConstants = DEFAULT_CONSTANTS
) -> dict[str, list[PipelineResult]]:
    """Convert completed dialogue records into metric inputs, per pipeline.

    Correctness projects the three-way classification two ways: a step
    counts as correct only when classified Optimal. Failed records are
    skipped.
    """
    from .kg import StepCategory

    out: dict[str, list[PipelineResult]] = {}
    for r in records:
        if r.failed or r.pre_classification is None or r.post_classification is None:
            continue
        if r.revision is not None and r.revision.improved_step is not None:
            predicted = r.revision.improved_step
        elif r.student is not None:
            predicted = r.student.next_step
        else:
            predicted = None
        tutor_rule = r.feedback.tutor_rule_predicted if r.feedback is not None else None
        out.setdefault(r.pipeline.value, []).append(
            PipelineResult(
                state_id=r.state_id,
                pipeline=r.pipeline.value,
                pre_correct=r.pre_classification.category is StepCategory.Optimal,
                post_correct=r.post_classification.category is StepCategory.Optimal,
                optimal_rule=r.optimal_rule,
                optimal_step_complexity=step_complexity(r.hint.optimal_step, constants)
                if r.hint is not None
                else 0.0,
                predicted_step=predicted,
                tutor_rule_predicted=tutor_rule,
            )
        )
    return out
