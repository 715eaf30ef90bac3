"""Synthetic corpus generation.

Twelve curated problems across the five practice levels, each verified
goal-reachable at fixed per-problem build bounds. Proof states are
harvested from walks over each problem's knowledge graph (always
including the root and on-path states, plus off-path detours on the
smaller graphs) and re-validated through justification when the
ProofState is constructed. Sampling is seeded and fully deterministic.
"""

from __future__ import annotations

import random
from collections import deque

from .corpus import CorpusManifest, CorpusState
from .formula import parse
from .kg import (
    BuildBounds,
    KnowledgeGraph,
    ProofProblem,
    ProofState,
    build_kg,
    key_string,
)
from .rules import Derivation

__all__ = ["curated_problems", "generate_corpus", "DEFAULT_STATE_TARGET"]

DEFAULT_STATE_TARGET = 60

_SMALL = {"max_nodes": 2000, "max_intermediates": 4}
_MEDIUM = {"max_nodes": 2400, "max_intermediates": 7}
_LARGE = {"max_nodes": 2800, "max_intermediates": 9}

_PROBLEM_SPECS = [
    ("lv2-chain", 2, ["(A > B)", "(B > C)", "A"], "C", _SMALL),
    ("lv2-split", 2, ["(P * Q)", "(P > R)"], "R", _SMALL),
    ("lv3-negate", 3, ["(K > O)", "~O", "(~K > M)"], "(M + K)", _MEDIUM),
    ("lv3-widen", 3, ["((A + B) > C)", "A"], "(C * A)", _MEDIUM),
    ("lv3-detour", 3, ["(S > D)", "((~S + Q) > Y)", "~D", "(~D > ~I)"], "Y", _MEDIUM),
    ("lv4-ladder", 4, ["((~K + L) > (M * N))", "(K > O)", "~O"], "N", _MEDIUM),
    ("lv4-relay", 4, ["(A > B)", "(B > C)", "(C > D)", "A"], "(D + A)", _MEDIUM),
    (
        "lv5-gather",
        5,
        ["((F * G) > H)", "(E > F)", "E", "G", "(H > (J + K))", "~J"],
        "K",
        _LARGE,
    ),
    ("lv5-swap", 5, ["(~P > (Q * R))", "(S > ~P)", "S"], "(R * Q)", _LARGE),
    (
        "lv6-cascade",
        6,
        ["((A + B) > C)", "(D > A)", "D", "(C > (E * F))"],
        "(F + A)",
        _LARGE,
    ),
    (
        "lv6-mirror",
        6,
        ["(A <> B)", "A", "(B > (C * D))", "((C * D) > (E + F))", "~E"],
        "F",
        _LARGE,
    ),
    ("lv6-negspace", 6, ["~(P + Q)", "(~P > R)"], "(R * ~Q)", _LARGE),
]


def curated_problems() -> tuple[tuple[ProofProblem, BuildBounds], ...]:
    out = []
    for pid, level, premises, conclusion, build in _PROBLEM_SPECS:
        problem = ProofProblem(
            id=pid,
            premises=tuple(parse(s) for s in premises),
            conclusion=parse(conclusion),
            level=level,
        )
        out.append((problem, BuildBounds(**build)))
    return tuple(out)


def _path_to(kg: KnowledgeGraph, key) -> tuple[Derivation, ...]:
    """Recover an ordered derivation sequence for a node, following edges."""
    if not key:
        return ()
    parent: dict = {kg.root: None}
    queue = deque([kg.root])
    while queue:
        current = queue.popleft()
        if current == key:
            break
        for e in kg.edges_from(current):
            if e.target <= key and e.target not in parent:
                parent[e.target] = e
                queue.append(e.target)
    if key not in parent:
        raise ValueError(f"no path recovers state {key_string(key)}")
    chain: list[Derivation] = []
    cursor = key
    while parent[cursor] is not None:
        edge = parent[cursor]
        chain.append(edge.derivation)
        cursor = edge.source
    chain.reverse()
    return tuple(chain)


def _eligible_keys(kg: KnowledgeGraph) -> list:
    """Non-goal nodes with a finite distance, nearest-first then stable."""
    keys = [
        k
        for k in kg.nodes
        if kg.distances.get(k) is not None and kg.distances[k] > 0
    ]
    keys.sort(key=lambda k: (len(k), key_string(k)))
    return keys


def generate_corpus(seed: int = 20230501, state_target: int = DEFAULT_STATE_TARGET) -> CorpusManifest:
    """Build every curated problem's graph and sample proof states from it."""
    rng = random.Random(seed)
    problems = curated_problems()
    built: list[tuple[ProofProblem, BuildBounds, KnowledgeGraph]] = []
    for problem, bounds in problems:
        kg = build_kg(problem, bounds=bounds)
        if not kg.goal_reachable:
            raise RuntimeError(f"curated problem {problem.id} cannot reach its conclusion")
        built.append((problem, bounds, kg))

    per_problem: dict[str, list] = {}
    for problem, _, kg in built:
        eligible = _eligible_keys(kg)
        base_quota = max(2, state_target // len(built))
        # stratify by depth so the corpus mixes fresh starts with states
        # deep into a derivation, the way real student snapshots do
        strata: dict[int, list] = {}
        for k in eligible:
            strata.setdefault(len(k), []).append(k)
        pool: list = []
        depths = sorted(strata)
        while len(pool) < 2 * base_quota and any(strata.get(d) for d in depths):
            for d in depths:
                bucket = strata.get(d)
                if bucket:
                    pool.append(bucket.pop(rng.randrange(len(bucket))))
        per_problem[problem.id] = pool

    states: list[CorpusState] = []
    counters: dict[str, int] = {}
    quota_round = 0
    while len(states) < state_target:
        progressed = False
        for problem, _, kg in built:
            if len(states) >= state_target:
                break
            pool = per_problem[problem.id]
            idx = quota_round
            if idx >= len(pool):
                continue
            key = pool[idx]
            counters[problem.id] = counters.get(problem.id, 0) + 1
            sid = f"{problem.id}-s{counters[problem.id]}"
            states.append(CorpusState(sid, ProofState(problem, _path_to(kg, key))))
            progressed = True
        if not progressed:
            raise RuntimeError(
                f"only {len(states)} eligible states exist across the corpus; "
                f"cannot reach the target of {state_target}"
            )
        quota_round += 1

    bounds_map = {problem.id: bounds for problem, bounds, _ in built}
    manifest = CorpusManifest(
        problems=tuple(p for p, _, _ in built),
        states=tuple(states),
        build_bounds=bounds_map,
    )
    return manifest
