import json
import random

import pytest

from prooftutor.formula import entails, parse, render
from prooftutor.kg import (
    BuildBounds,
    NoOptimalStep,
    ProofProblem,
    ProofState,
    StepCategory,
    UnknownState,
    build_kg,
    classify_step,
    derivational_depth,
    distance,
    key_string,
    kg_from_dict,
    kg_to_dict,
    optimal_steps,
)
from prooftutor.rules import Derivation, EnumerationConfig, RuleId, justify

from conftest import random_formula
from oracles import OracleSpace

TRIVIAL = ProofProblem("mp-direct", (parse("P"), parse("(P > Q)")), parse("Q"), 2)
SMALL_BOUNDS = BuildBounds(max_nodes=5000, max_intermediates=2)
SMALL_CONFIG = EnumerationConfig(
    max_derived_complexity=4.0,
    addition_vocabulary=frozenset({parse("Q")}),
    rewrite_depth_limit=1,
)


def ladder_state3(ladder_problem):
    return ProofState(
        ladder_problem,
        (
            Derivation(parse("~K"), RuleId.MT, (parse("(K > O)"), parse("~O"))),
            Derivation(parse("(~K + L)"), RuleId.Add, (parse("~K"),)),
            Derivation(
                parse("(M * N)"),
                RuleId.MP,
                (parse("((~K + L) > (M * N))"), parse("(~K + L)")),
            ),
        ),
    )


class TestProofTypes:
    def test_problem_validation(self):
        with pytest.raises(ValueError):
            ProofProblem("x", (), parse("A"), 2)
        with pytest.raises(ValueError):
            ProofProblem("x", (parse("A"),), parse("A"), 2)
        with pytest.raises(ValueError):
            ProofProblem("x", (parse("A"),), parse("B"), 7)

    def test_state_prefix_closure(self, ladder_problem):
        good = ladder_state3(ladder_problem)
        assert len(good.intermediates) == 3
        with pytest.raises(ValueError):
            ProofState(
                ladder_problem,
                (Derivation(parse("(M * N)"), RuleId.MP,
                            (parse("((~K + L) > (M * N))"), parse("(~K + L)"))),),
            )

    def test_state_rejects_duplicates(self, ladder_problem):
        mt = Derivation(parse("~K"), RuleId.MT, (parse("(K > O)"), parse("~O")))
        with pytest.raises(ValueError):
            ProofState(ladder_problem, (mt, mt))


class TestBuild:
    def test_trivial_problem(self):
        kg = build_kg(TRIVIAL, SMALL_CONFIG, SMALL_BOUNDS)
        root = ProofState(TRIVIAL)
        assert distance(kg, root) == 1
        steps = optimal_steps(kg, root)
        assert steps[0] == Derivation(parse("Q"), RuleId.MP, (parse("(P > Q)"), parse("P")))
        assert len(steps) == 1

    def test_ladder_root_distance_four(self, ladder_kg, ladder_problem):
        assert distance(ladder_kg, ProofState(ladder_problem)) == 4

    def test_ladder_witness_path(self, ladder_kg, ladder_problem):
        state = ProofState(ladder_problem)
        expected = ["~K", "(~K + L)", "(M * N)", "N"]
        for want in expected:
            step = optimal_steps(ladder_kg, state)[0]
            assert render(step.derived) == want
            state = state.extended(step)
        assert distance(ladder_kg, state) == 0

    def test_ladder_state3_distance_one(self, ladder_kg, ladder_problem):
        assert distance(ladder_kg, ladder_state3(ladder_problem)) == 1

    def test_goal_unreachable_flag(self):
        problem = ProofProblem("unreach", (parse("A"),), parse("B"), 2)
        kg = build_kg(problem, bounds=BuildBounds(max_nodes=300, max_intermediates=3))
        assert not kg.goal_reachable
        assert distance(kg, ProofState(problem)) is None

    def test_truncation_flag(self, ladder_problem):
        kg = build_kg(ladder_problem, bounds=BuildBounds(max_nodes=10, max_intermediates=6))
        assert kg.truncated

    def test_determinism(self):
        a = build_kg(TRIVIAL, SMALL_CONFIG, SMALL_BOUNDS)
        b = build_kg(TRIVIAL, SMALL_CONFIG, SMALL_BOUNDS)
        assert kg_to_dict(a) == kg_to_dict(b)

    def test_every_edge_is_justified(self):
        kg = build_kg(TRIVIAL, SMALL_CONFIG, SMALL_BOUNDS)
        premises = frozenset(TRIVIAL.premises)
        for edge in kg.edges:
            statements = premises | edge.source
            d = edge.derivation
            assert justify(d.derived, d.rule, d.parents, statements), str(d)

    def test_edges_add_exactly_one_statement(self):
        kg = build_kg(TRIVIAL, SMALL_CONFIG, SMALL_BOUNDS)
        for edge in kg.edges:
            assert len(edge.target) == len(edge.source) + 1
            assert edge.source < edge.target

    def test_soundness_end_to_end(self):
        kg = build_kg(TRIVIAL, SMALL_CONFIG, SMALL_BOUNDS)
        premises = set(TRIVIAL.premises)
        for key in kg.nodes:
            for statement in key:
                assert entails(premises, statement), render(statement)

    def test_distance_consistency(self, ladder_kg):
        for key in ladder_kg.nodes:
            d = ladder_kg.distances.get(key)
            if d is None or d == 0:
                continue
            successor_distances = [
                ladder_kg.distances.get(e.target)
                for e in ladder_kg.edges_from(key)
            ]
            finite = [s for s in successor_distances if s is not None]
            assert d - 1 in finite
            assert all(s >= d - 1 for s in finite)


class TestQueries:
    def test_unknown_state(self, ladder_kg, ladder_problem):
        weird = ProofState(
            ladder_problem,
            (
                Derivation(parse("(~O * ~O)"), RuleId.Conj, (parse("~O"), parse("~O"))),
                Derivation(
                    parse("((~O * ~O) * (K > O))",),
                    RuleId.Conj,
                    (parse("(~O * ~O)"), parse("(K > O)")),
                ),
                Derivation(
                    parse("(((~O * ~O) * (K > O)) + ~K)"),
                    RuleId.Add,
                    (parse("((~O * ~O) * (K > O))"),),
                ),
                Derivation(
                    parse("((((~O * ~O) * (K > O)) + ~K) + ~K)"),
                    RuleId.Add,
                    (parse("(((~O * ~O) * (K > O)) + ~K)"),),
                ),
                Derivation(
                    parse("(((((~O * ~O) * (K > O)) + ~K) + ~K) + ~K)"),
                    RuleId.Add,
                    (parse("((((~O * ~O) * (K > O)) + ~K) + ~K)"),),
                ),
            ),
        )
        with pytest.raises(UnknownState):
            distance(ladder_kg, weird)

    def test_state_from_another_problem_rejected(self, ladder_kg):
        other = ProofProblem("other", (parse("A"), parse("(A > B)")), parse("B"), 2)
        with pytest.raises(UnknownState, match="other"):
            distance(ladder_kg, ProofState(other))

    def test_goal_state_has_no_optimal_step(self, ladder_kg, ladder_problem):
        state = ladder_state3(ladder_problem).extended(
            Derivation(parse("N"), RuleId.Simp, (parse("(M * N)"),))
        )
        assert distance(ladder_kg, state) == 0
        with pytest.raises(NoOptimalStep):
            optimal_steps(ladder_kg, state)

    def test_classify_ladder_simp(self, ladder_kg, ladder_problem):
        c = classify_step(
            ladder_kg, ladder_state3(ladder_problem), parse("N"), RuleId.Simp, [parse("(M * N)")]
        )
        assert c.category is StepCategory.Optimal
        assert c.justified
        assert (c.distance_before, c.distance_after) == (1, 0)

    def test_classify_optimal_but_unjustified(self, ladder_kg, ladder_problem):
        c = classify_step(
            ladder_kg, ladder_state3(ladder_problem), parse("N"), RuleId.MP, [parse("(M * N)")]
        )
        assert c.category is StepCategory.Optimal
        assert not c.justified

    def test_classify_invalid(self, ladder_kg, ladder_problem):
        c = classify_step(
            ladder_kg, ladder_state3(ladder_problem), parse("(M + M)"), RuleId.Add, [parse("M")]
        )
        assert c.category is StepCategory.Invalid
        assert c.distance_after is None

    def test_classify_valid_non_optimal(self, ladder_kg, ladder_problem):
        root = ProofState(ladder_problem)
        candidates = [
            e.derivation
            for e in ladder_kg.edges_from(root.key())
            if ladder_kg.distances.get(e.target) != 3
        ]
        assert candidates, "expected at least one non-optimal edge at the root"
        d = candidates[0]
        c = classify_step(ladder_kg, root, d.derived, d.rule, list(d.parents))
        assert c.category is StepCategory.ValidNonOptimal

    def test_ladder_root_hint_unique_mt(self, ladder_kg, ladder_problem):
        root = ProofState(ladder_problem)
        steps = optimal_steps(ladder_kg, root)
        assert render(steps[0].derived) == "~K"
        assert steps[0].rule is RuleId.MT
        # enumerate all distance-reducing edges: the hint is unique
        reducing = [
            e for e in ladder_kg.edges_from(root.key()) if ladder_kg.distances.get(e.target) == 3
        ]
        assert len({e.derivation for e in reducing}) == 1

    def test_derivational_depth(self, ladder_kg, ladder_problem):
        root = ProofState(ladder_problem)
        assert derivational_depth(ladder_kg, root, parse("~K")) == 1
        assert derivational_depth(ladder_kg, root, parse("(M * N)")) == 3
        assert derivational_depth(ladder_kg, root, parse("~O")) == 0


class TestSerialization:
    def test_round_trip(self, ladder_kg):
        doc = kg_to_dict(ladder_kg)
        clone = kg_from_dict(json.loads(json.dumps(doc)))
        assert kg_to_dict(clone) == doc

    def test_key_string_stable(self):
        key = frozenset({parse("~K"), parse("(M * N)")})
        assert key_string(key) == "(M * N)|~K"


class TestOracleEquivalence:
    """classify_step against a from-scratch classifier on small problems."""

    def _random_problem(self, rng):
        while True:
            premises = tuple(
                random_formula(rng, rng.randint(1, 2), "PQRS")
                for _ in range(rng.randint(2, 4))
            )
            premise_set = set(premises)
            if len(premise_set) != len(premises):
                continue
            goal = random_formula(rng, 1, "PQRS")
            if goal in premise_set:
                continue
            return ProofProblem(f"rand", premises, goal, 2)

    def test_agreement_on_random_problems(self):
        rng = random.Random(2024)
        config = EnumerationConfig(
            max_derived_complexity=3.5,
            addition_vocabulary=frozenset({parse("P"), parse("Q")}),
            rewrite_depth_limit=1,
        )
        bounds = BuildBounds(max_nodes=5000, max_intermediates=2)
        pairs = 0
        problems = 0
        while problems < 12:
            problem = self._random_problem(rng)
            kg = build_kg(problem, config, bounds)
            if kg.truncated:
                continue
            problems += 1
            oracle = OracleSpace(
                problem,
                config.addition_vocabulary,
                config.rewrite_depth_limit,
                config.max_derived_complexity,
                bounds.max_intermediates,
            )
            assert set(kg.nodes) == oracle.states
            produced_edges = {(e.source, e.target, e.derivation.derived) for e in kg.edges}
            assert produced_edges == oracle.edges
            node_sample = sorted(kg.nodes, key=key_string)[:4]
            for key in node_sample:
                state = ProofState(problem, _chain_for(kg, key))
                steps = {e.derivation.derived for e in edges_of(kg, key)}
                junk = [random_formula(rng, 1, "PQRS") for _ in range(3)]
                for step in sorted(steps | set(junk), key=render)[:8]:
                    got = classify_step(kg, state, step, RuleId.MP, [])
                    want_cat, want_before, want_after = oracle.classify(key, step)
                    pairs += 1
                    assert got.category.value == want_cat, (problem, key_string(key), render(step))
                    assert got.distance_before == want_before
                    assert got.distance_after == want_after
        assert pairs >= 100


def edges_of(kg, key):
    return kg.edges_from(key)


def _chain_for(kg, key):
    """Recover an ordered derivation chain for a node by walking edges."""
    from collections import deque

    parent = {kg.root: None}
    queue = deque([kg.root])
    while queue:
        current = queue.popleft()
        if current == key:
            break
        for e in kg.edges_from(current):
            if e.target <= key and e.target not in parent:
                parent[e.target] = e
                queue.append(e.target)
    chain = []
    cursor = key
    while parent[cursor] is not None:
        chain.append(parent[cursor].derivation)
        cursor = parent[cursor].source
    chain.reverse()
    return tuple(chain)
