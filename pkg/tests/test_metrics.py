import random

import pytest

from prooftutor.formula import parse
from prooftutor.metrics import (
    DEFAULT_BUCKET_EDGES,
    ComplexityConstants,
    EmptyInput,
    MisalignedInputs,
    PipelineResult,
    accuracy,
    bucket_report,
    learning_gain,
    mean_improved_complexity,
    report_to_csv,
    rule_accuracy,
    step_complexity,
    table_report,
    unique_improvement_count,
)
from prooftutor.rules import RuleId

from conftest import random_formula


def result(sid, pipeline="Judge", pre=False, post=True, complexity=2.0,
           predicted=None, tutor_rule=None, optimal_rule=RuleId.MP):
    return PipelineResult(
        state_id=sid,
        pipeline=pipeline,
        pre_correct=pre,
        post_correct=post,
        optimal_rule=optimal_rule,
        optimal_step_complexity=complexity,
        predicted_step=predicted,
        tutor_rule_predicted=tutor_rule,
    )


class TestStepComplexity:
    def test_variable_is_zero(self):
        assert step_complexity(parse("F")) == 0.0

    def test_disjunction(self):
        assert step_complexity(parse("(A + B)")) == pytest.approx(1.0)

    def test_nested_implication(self):
        assert step_complexity(parse("(A > (B + C))")) == pytest.approx(3.0)

    def test_published_ordering(self):
        assert (
            step_complexity(parse("F"))
            < step_complexity(parse("(A + B)"))
            < step_complexity(parse("(A > (B + C))"))
        )

    def test_monotone_under_wrapping(self):
        rng = random.Random(11)
        from prooftutor.formula import Conjunction, Negation, Variable

        for _ in range(60):
            f = random_formula(rng, 3)
            assert step_complexity(Negation(f)) > step_complexity(f)
            assert step_complexity(Conjunction(f, Variable("Z"))) > step_complexity(f)

    def test_custom_constants(self):
        constants = ComplexityConstants(
            weights={
                "negation": 1.0,
                "conjunction": 2.0,
                "disjunction": 2.0,
                "implication": 3.0,
                "biconditional": 4.0,
            },
            alpha=2.0,
        )
        assert step_complexity(parse("(A > (B + C))"), constants) == pytest.approx(3.0 + 2.0 * 2.0)

    def test_constants_validated(self):
        with pytest.raises(ValueError):
            ComplexityConstants(alpha=1.0)
        with pytest.raises(ValueError):
            ComplexityConstants(weights={"negation": 0.0, "conjunction": 1, "disjunction": 1,
                                         "implication": 1, "biconditional": 1})


class TestLearningGain:
    def test_table_one_row(self):
        assert learning_gain(21.31, 75.38) == pytest.approx(54.07, abs=0.005)

    def test_zero_when_equal(self):
        assert learning_gain(33.3, 33.3) == 0.0

    def test_gemini_tutor_delta(self):
        assert learning_gain(52.52, 73.92) == pytest.approx(21.40, abs=0.005)

    def test_antisymmetric(self):
        assert learning_gain(10.0, 60.0) == -learning_gain(60.0, 10.0)

    def test_range_checked(self):
        with pytest.raises(ValueError):
            learning_gain(-1.0, 50.0)
        with pytest.raises(ValueError):
            learning_gain(10.0, 101.0)


class TestRuleAccuracy:
    def test_all_matching(self):
        results = [result(f"s{i}", tutor_rule=RuleId.MP) for i in range(4)]
        assert rule_accuracy(results) == 100.0

    def test_half_matching(self):
        results = [
            result("a", tutor_rule=RuleId.MP),
            result("b", tutor_rule=RuleId.MT),
            result("c", tutor_rule=RuleId.MP),
            result("d", tutor_rule=RuleId.DS),
        ]
        assert rule_accuracy(results) == 50.0

    def test_seven_of_ten(self):
        results = [result(f"s{i}", tutor_rule=RuleId.MP) for i in range(7)]
        results += [result(f"t{i}", tutor_rule=RuleId.Add) for i in range(3)]
        assert rule_accuracy(results) == 70.0

    def test_empty(self):
        with pytest.raises(EmptyInput):
            rule_accuracy([])

    def test_missing_prediction_rejected(self):
        with pytest.raises(ValueError):
            rule_accuracy([result("a")])


class TestMeanImprovedComplexity:
    def test_single(self):
        assert mean_improved_complexity([result("a", pre=False, post=True, complexity=3.0)]) == 3.0

    def test_none_improved(self):
        assert mean_improved_complexity([result("a", pre=True, post=True)]) is None

    def test_mean(self):
        results = [
            result("a", complexity=2.0),
            result("b", complexity=4.0),
            result("c", pre=True, post=True, complexity=100.0),
            result("d", pre=False, post=False, complexity=100.0),
        ]
        assert mean_improved_complexity(results) == pytest.approx(3.0)


class TestUniqueImprovementCount:
    def test_counts_judge_only_successes(self):
        judge = [result("a"), result("b"), result("c", post=False)]
        teacher = [
            result("a", pipeline="Teacher", post=False, predicted=parse("(A + B)")),
            result("b", pipeline="Teacher", post=False, predicted=parse("C")),
            result("c", pipeline="Teacher", post=False),
        ]
        uic = unique_improvement_count(judge, teacher)
        assert uic.count == 2
        # teacher predictions: complexities 1.0 and 0.0 against optimal 2.0
        assert uic.mean_gap == pytest.approx(((1.0 - 2.0) + (0.0 - 2.0)) / 2)

    def test_identical_outcomes(self):
        judge = [result("a"), result("b")]
        teacher = [result("a", pipeline="Teacher"), result("b", pipeline="Teacher")]
        assert unique_improvement_count(judge, teacher).count == 0

    def test_disjoint_ids(self):
        with pytest.raises(MisalignedInputs):
            unique_improvement_count([result("a")], [result("b", pipeline="Teacher")])

    def test_bounds(self):
        rng = random.Random(5)
        judge = [result(f"s{i}", post=rng.random() < 0.6) for i in range(40)]
        teacher = [
            result(f"s{i}", pipeline="Teacher", post=rng.random() < 0.5) for i in range(40)
        ]
        uic = unique_improvement_count(judge, teacher)
        judge_successes = sum(r.post_correct for r in judge)
        teacher_failures = sum(not r.post_correct for r in teacher)
        assert uic.count <= min(judge_successes, teacher_failures)


class TestBucketReport:
    def test_all_below_first_edge(self):
        rows = bucket_report([result(f"s{i}", complexity=1.0) for i in range(5)])
        assert [r.n for r in rows] == [5, 0, 0, 0]
        assert rows[0].post_accuracy == 100.0

    def test_partition_and_accuracy(self):
        results = [
            result("a", complexity=1.0, post=True),
            result("b", complexity=3.0, post=False),
            result("c", complexity=4.2, post=True),
            result("d", complexity=9.0, post=False),
            result("e", complexity=9.0, post=True),
        ]
        rows = bucket_report(results)
        assert [r.n for r in rows] == [1, 1, 1, 2]
        assert rows[0].post_accuracy == 100.0
        assert rows[1].post_accuracy == 0.0
        assert rows[3].post_accuracy == 50.0

    def test_empty(self):
        rows = bucket_report([])
        assert all(r.n == 0 and r.post_accuracy is None for r in rows)

    def test_weighted_mean_equals_global(self):
        rng = random.Random(6)
        results = [
            result(f"s{i}", complexity=rng.uniform(0, 8), post=rng.random() < 0.5)
            for i in range(200)
        ]
        rows = bucket_report(results)
        weighted = sum(r.n * r.post_accuracy for r in rows if r.n) / len(results)
        assert weighted == pytest.approx(accuracy([r.post_correct for r in results]))

    def test_edges_validated(self):
        with pytest.raises(ValueError):
            bucket_report([], edges=(3.0, 2.0))

    def test_default_edges(self):
        assert DEFAULT_BUCKET_EDGES == (2.5, 4.0, 4.5)


class TestTableReport:
    def test_headline_columns(self):
        tutor = [
            result("a", pipeline="Tutor", pre=False, post=True, tutor_rule=RuleId.MP),
            result("b", pipeline="Tutor", pre=True, post=True, tutor_rule=RuleId.DS),
        ]
        teacher = [
            result("a", pipeline="Teacher", pre=False, post=False, predicted=parse("(A + B)")),
            result("b", pipeline="Teacher", pre=True, post=True),
        ]
        judge = [
            result("a", pipeline="Judge", pre=False, post=True),
            result("b", pipeline="Judge", pre=True, post=True),
        ]
        row = table_report({"Tutor": tutor, "Teacher": teacher, "Judge": judge}, label="demo")
        assert row["Pre"] == 50.0
        assert row["Rule Acc."] == 50.0
        assert row["Post (Judge)"] == 100.0
        assert row["Δ pp (Judge)"] == 50.0
        assert row["Δ pp (best)"] == 50.0
        assert row["UIC"] == 1
        assert row["Gap"] == pytest.approx(-1.0)

    def test_single_pipeline_marks_uic_empty(self):
        tutor = [result("a", pipeline="Tutor", tutor_rule=RuleId.MP)]
        row = table_report({"Tutor": tutor})
        assert row["UIC"] is None
        assert row["Gap"] is None
        csv_text = report_to_csv([row])
        assert "UIC" in csv_text.splitlines()[0]
