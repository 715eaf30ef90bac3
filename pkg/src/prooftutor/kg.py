"""Proof-state knowledge graphs: reachable-state enumeration and queries.

A node is the set of statements a student has derived so far (order
erased); an edge adds exactly one statement and is annotated with the
derivation that produced it. Distances to the nearest goal state are
computed by reverse breadth-first search and drive next-step
classification and hint selection.

Blind breadth-first expansion drowns in combinatorics long before it
reaches goals that sit four or more steps deep, so construction runs in
two phases: bounded BFS for the dense neighborhood of the root, then, if
no goal state was reached, a vocabulary-restricted forward-chaining
search for a shortest derivation of the conclusion whose path states are
spliced into the graph. Both phases are deterministic.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .formula import Formula, parse, render, subformulas
from .rules import (
    EQUIVALENCE_RULES,
    Derivation,
    EnumerationConfig,
    RuleId,
    applicable_derivations,
    apply_rule,
    justify,
    rule_arity,
)

__all__ = [
    "StateKey",
    "ProofProblem",
    "ProofState",
    "StepCategory",
    "StepClassification",
    "Edge",
    "KnowledgeGraph",
    "BuildBounds",
    "UnknownState",
    "NoOptimalStep",
    "build_kg",
    "default_config_for",
    "distance",
    "classify_step",
    "optimal_steps",
    "derivational_depth",
    "key_string",
    "kg_to_dict",
    "kg_from_dict",
    "save_kg",
    "load_kg",
]

#: Canonical node identity: the set of derived statements, order erased.
StateKey = frozenset

KG_FORMAT_VERSION = 1


class UnknownState(KeyError):
    """Raised when a queried state is not a node of the graph."""


class NoOptimalStep(LookupError):
    """Raised when a state is a goal or cannot reach one."""


@dataclass(frozen=True)
class ProofProblem:
    id: str
    premises: tuple[Formula, ...]
    conclusion: Formula
    level: int

    def __post_init__(self) -> None:
        if not self.premises:
            raise ValueError("premises must be non-empty")
        if self.conclusion in self.premises:
            raise ValueError("conclusion is already a premise")
        if not 2 <= self.level <= 6:
            raise ValueError(f"level must be 2-6, got {self.level}")


@dataclass(frozen=True)
class ProofState:
    """A problem plus the ordered derivations made so far.

    Construction validates prefix-closure: each intermediate must be
    justified by the premises and earlier intermediates, and must be new.
    """

    problem: ProofProblem
    intermediates: tuple[Derivation, ...] = ()

    def __post_init__(self) -> None:
        available = set(self.problem.premises)
        for i, d in enumerate(self.intermediates):
            if d.derived in available:
                raise ValueError(f"intermediate {i} duplicates an earlier statement: {d}")
            if not justify(d.derived, d.rule, d.parents, available):
                raise ValueError(f"intermediate {i} is not justified: {d}")
            available.add(d.derived)

    def key(self) -> StateKey:
        return frozenset(d.derived for d in self.intermediates)

    def statements(self) -> frozenset[Formula]:
        return frozenset(self.problem.premises) | self.key()

    def ordered_statements(self) -> tuple[Formula, ...]:
        return self.problem.premises + tuple(d.derived for d in self.intermediates)

    def extended(self, derivation: Derivation) -> "ProofState":
        return ProofState(self.problem, self.intermediates + (derivation,))


class StepCategory(str, Enum):
    Optimal = "Optimal"
    ValidNonOptimal = "ValidNonOptimal"
    Invalid = "Invalid"


@dataclass(frozen=True)
class StepClassification:
    category: StepCategory
    justified: bool
    distance_before: int | None
    distance_after: int | None

    def to_dict(self) -> dict:
        return {
            "category": self.category.value,
            "justified": self.justified,
            "distance_before": self.distance_before,
            "distance_after": self.distance_after,
        }

    @staticmethod
    def from_dict(d: dict) -> "StepClassification":
        return StepClassification(
            StepCategory(d["category"]),
            bool(d["justified"]),
            d["distance_before"],
            d["distance_after"],
        )


@dataclass(frozen=True)
class Edge:
    source: StateKey
    target: StateKey
    derivation: Derivation


@dataclass(frozen=True)
class BuildBounds:
    max_nodes: int = 200_000
    max_intermediates: int = 12

    def __post_init__(self) -> None:
        if self.max_nodes <= 0 or self.max_intermediates <= 0:
            raise ValueError("bounds must be positive")


@dataclass
class KnowledgeGraph:
    problem: ProofProblem
    config: EnumerationConfig
    bounds: BuildBounds
    nodes: list[StateKey]
    edges: list[Edge]
    goal_keys: frozenset
    distances: dict
    truncated: bool
    witness_injected: bool
    root: StateKey = frozenset()
    out_edges: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.out_edges:
            for e in self.edges:
                self.out_edges.setdefault(e.source, []).append(e)
        self._node_set = frozenset(self.nodes)

    @property
    def goal_reachable(self) -> bool:
        return bool(self.goal_keys)

    def has_node(self, key: StateKey) -> bool:
        return key in self._node_set

    def edges_from(self, key: StateKey) -> list[Edge]:
        return self.out_edges.get(key, [])


def default_config_for(
    problem: ProofProblem,
    max_derived_complexity: float = 12.0,
    rewrite_depth_limit: int = 2,
) -> EnumerationConfig:
    """Enumeration config whose Addition vocabulary is the problem's subformulas."""
    vocab: set[Formula] = set()
    for f in problem.premises + (problem.conclusion,):
        vocab.update(subformulas(f))
    return EnumerationConfig(
        max_derived_complexity=max_derived_complexity,
        addition_vocabulary=frozenset(vocab),
        rewrite_depth_limit=rewrite_depth_limit,
    )


# ---------------------------------------------------------------------------
# Witness search: goal-path completion when BFS truncates short of a goal
# ---------------------------------------------------------------------------

def _witness_candidates(problem: ProofProblem, config: EnumerationConfig) -> frozenset[Formula]:
    """Statements a shortest derivation plausibly passes through.

    Subformulas of the problem, their negations, single root-level
    equivalence rewrites of those, and all subformulas thereof. Textbook
    solution paths live almost entirely in this space.
    """
    from .formula import Negation

    base: set[Formula] = set()
    for f in problem.premises + (problem.conclusion,):
        base.update(subformulas(f))
    extended = set(base)
    extended.update(Negation(f) for f in base)
    root_cfg = EnumerationConfig(
        max_derived_complexity=float("inf"),
        rewrite_depth_limit=0,
    )
    rewritten: set[Formula] = set()
    for f in extended:
        for rule in EQUIVALENCE_RULES:
            rewritten.update(apply_rule(rule, (f,), root_cfg))
    closure: set[Formula] = set()
    for f in extended | rewritten:
        closure.update(subformulas(f))
    return frozenset(closure)


def _find_witness(
    problem: ProofProblem, config: EnumerationConfig, max_steps: int
) -> list[Derivation] | None:
    """Shortest-support derivation of the conclusion inside the candidate space.

    Semi-naive forward chaining: each round only considers parent
    selections touching statements added in the previous round. Returns a
    prefix-closed derivation sequence, or None.
    """
    candidates = _witness_candidates(problem, config)
    producer: dict[Formula, Derivation | None] = {p: None for p in problem.premises}
    fresh = sorted(producer, key=render)

    def selections(new: list[Formula], known: list[Formula]):
        for rule in RuleId:
            if rule_arity(rule) == 1:
                for p in new:
                    yield rule, (p,)
            else:
                for p in new:
                    for q in known:
                        if p is not q or rule is RuleId.Conj:
                            yield rule, (p, q)
                for p in known:
                    if p in new:
                        continue
                    for q in new:
                        yield rule, (p, q)

    for _ in range(max_steps):
        if problem.conclusion in producer:
            break
        known = sorted(producer, key=render)
        additions: list[Derivation] = []
        for rule, parent_sel in selections(fresh, known):
            for derived in apply_rule(rule, parent_sel, config):
                if derived in candidates and derived not in producer:
                    additions.append(Derivation(derived, rule, parent_sel))
        if not additions:
            break
        additions.sort(
            key=lambda d: (d.rule.value, render(d.derived), tuple(render(p) for p in d.parents))
        )
        fresh = []
        for d in additions:
            if d.derived not in producer:
                producer[d.derived] = d
                fresh.append(d.derived)

    if problem.conclusion not in producer:
        return None

    order: list[Derivation] = []
    seen: set[Formula] = set()

    def visit(f: Formula) -> None:
        if f in seen:
            return
        seen.add(f)
        d = producer.get(f)
        if d is None:
            return
        for p in d.parents:
            visit(p)
        order.append(d)

    visit(problem.conclusion)
    if len(order) > max_steps:
        return None
    return order


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

class _Builder:
    def __init__(self, problem: ProofProblem, config: EnumerationConfig, bounds: BuildBounds):
        self.problem = problem
        self.config = config
        self.bounds = bounds
        self.premises = frozenset(problem.premises)
        self.root: StateKey = frozenset()
        self.nodes: dict[StateKey, None] = {self.root: None}
        self.edges: list[Edge] = []
        self.edge_seen: set[tuple[StateKey, StateKey, Derivation]] = set()
        self.goal_keys: set[StateKey] = set()
        self.truncated = False
        # goal-completion suffix for states on (or one step off) the witness path
        self.suffix: dict[StateKey, tuple[Derivation, ...]] = {}

    def add_node(self, key: StateKey) -> bool:
        """Register a node; False when the cap forbids it."""
        if key in self.nodes:
            return True
        if len(self.nodes) >= self.bounds.max_nodes:
            self.truncated = True
            return False
        self.nodes[key] = None
        if self.problem.conclusion in key:
            self.goal_keys.add(key)
        return True

    def add_edge(self, source: StateKey, target: StateKey, d: Derivation) -> None:
        triple = (source, target, d)
        if triple not in self.edge_seen:
            self.edge_seen.add(triple)
            self.edges.append(Edge(source, target, d))

    def inject_chain(self, start: StateKey, chain: tuple[Derivation, ...]) -> None:
        """Splice a derivation chain into the graph, skipping satisfied steps."""
        key = start
        for d in chain:
            if d.derived in key:
                continue
            new_key = key | {d.derived}
            if len(new_key) > self.bounds.max_intermediates or not self.add_node(new_key):
                return
            self.add_edge(key, new_key, d)
            key = new_key

    def path_states(self, witness: list[Derivation]) -> list[StateKey]:
        """Inject the root witness path; record each state's completion suffix."""
        states = [self.root]
        self.suffix[self.root] = tuple(witness)
        key = self.root
        for i, d in enumerate(witness):
            new_key = key | {d.derived}
            if len(new_key) > self.bounds.max_intermediates or not self.add_node(new_key):
                break
            self.add_edge(key, new_key, d)
            self.suffix[new_key] = tuple(witness[i + 1:])
            states.append(new_key)
            key = new_key
        return states

    def run(self, seed_queue: list[StateKey]) -> None:
        queue: deque[StateKey] = deque(seed_queue)
        queued = set(seed_queue)
        while queue:
            key = queue.popleft()
            if self.problem.conclusion in key or len(key) >= self.bounds.max_intermediates:
                continue
            statements = self.premises | key
            source_suffix = self.suffix.get(key)
            for d in applicable_derivations(statements, self.config):
                new_key = key | {d.derived}
                created = new_key not in self.nodes
                if not self.add_node(new_key):
                    continue
                self.add_edge(key, new_key, d)
                if created:
                    if new_key not in queued and self.problem.conclusion not in new_key:
                        queue.append(new_key)
                        queued.add(new_key)
                    if source_suffix:
                        self.inject_chain(new_key, source_suffix)


def build_kg(
    problem: ProofProblem,
    config: EnumerationConfig | None = None,
    bounds: BuildBounds = BuildBounds(),
) -> KnowledgeGraph:
    """Enumerate reachable proof states and annotate single-step edges.

    Construction order, all deterministic:

    1. A witness derivation of the conclusion is searched for (bounded,
       vocabulary-restricted forward chaining) and its path states are
       spliced in with goal-completion suffixes recorded.
    2. BFS expansion, seeded with the witness-path states so the goal
       neighborhood is explored before the node budget burns: each
       expanded state spawns one successor per applicable derivation,
       states deduplicate by key, goal states are not expanded, and the
       depth bound and node cap stop growth (setting the truncation
       flag). One-step detours off the witness path inherit a spliced
       completion chain so they stay goal-connected.

    On an untruncated build every injected node and edge is rediscovered
    by the exhaustive expansion itself, so phases 1 and the splicing are
    observationally a no-op and the graph equals plain bounded BFS.
    Distances are reverse BFS from the goal states.
    """
    if config is None:
        config = default_config_for(problem)
    builder = _Builder(problem, config, bounds)
    witness = _find_witness(problem, config, bounds.max_intermediates)
    witness_injected = False
    seed: list[StateKey] = [builder.root]
    if witness is not None:
        witness_injected = True
        path = builder.path_states(witness)
        seed = [k for k in path if problem.conclusion not in k]
    builder.run(seed)

    distances = _reverse_bfs(builder.nodes, builder.edges, builder.goal_keys)
    return KnowledgeGraph(
        problem=problem,
        config=config,
        bounds=bounds,
        nodes=list(builder.nodes),
        edges=builder.edges,
        goal_keys=frozenset(builder.goal_keys),
        distances=distances,
        truncated=builder.truncated,
        witness_injected=witness_injected,
    )


def _reverse_bfs(nodes: dict, edges: list[Edge], goal_keys: set) -> dict:
    incoming: dict[StateKey, list[StateKey]] = {}
    for e in edges:
        incoming.setdefault(e.target, []).append(e.source)
    distances: dict[StateKey, int] = {g: 0 for g in goal_keys}
    queue: deque[StateKey] = deque(goal_keys)
    while queue:
        key = queue.popleft()
        d = distances[key]
        for src in incoming.get(key, ()):
            if src not in distances:
                distances[src] = d + 1
                queue.append(src)
    return distances


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------

def _require_node(kg: KnowledgeGraph, state: ProofState) -> StateKey:
    if state.problem != kg.problem:
        raise UnknownState(
            f"state belongs to problem {state.problem.id!r}, graph covers {kg.problem.id!r}"
        )
    key = state.key()
    if not kg.has_node(key):
        raise UnknownState(f"state {key_string(key) or '<root>'} is not in the graph")
    return key


def distance(kg: KnowledgeGraph, state: ProofState) -> int | None:
    """Shortest edge count to any goal state; None when unreachable."""
    key = _require_node(kg, state)
    return kg.distances.get(key)


def classify_step(
    kg: KnowledgeGraph,
    state: ProofState,
    step: Formula,
    rule: RuleId,
    parents: list[Formula] | tuple[Formula, ...],
) -> StepClassification:
    """Classify a proposed next step against the graph.

    Invalid when no edge from the state derives the step; Optimal when the
    step's target sits exactly one closer to the goal; ValidNonOptimal
    otherwise. ``justified`` independently checks the claimed rule and
    parents, so a step can be Optimal yet unjustified.
    """
    key = _require_node(kg, state)
    justified = justify(step, rule, tuple(parents), state.statements())
    d_before = kg.distances.get(key)
    step_edges = [e for e in kg.edges_from(key) if e.derivation.derived == step]
    if not step_edges:
        return StepClassification(StepCategory.Invalid, justified, d_before, None)
    d_after = kg.distances.get(step_edges[0].target)
    if d_before is not None and d_after is not None and d_after == d_before - 1:
        return StepClassification(StepCategory.Optimal, justified, d_before, d_after)
    return StepClassification(StepCategory.ValidNonOptimal, justified, d_before, d_after)


def optimal_steps(kg: KnowledgeGraph, state: ProofState) -> list[Derivation]:
    """All distance-reducing derivations from the state, hint first.

    Ordered by (rendered statement, rule name); the first element is the
    hint served to feedback agents and sessions.
    """
    key = _require_node(kg, state)
    d = kg.distances.get(key)
    if d is None:
        raise NoOptimalStep("state cannot reach the goal within the built graph")
    if d == 0:
        raise NoOptimalStep("state is already a goal state")
    found: list[Derivation] = []
    seen: set[Derivation] = set()
    for e in kg.edges_from(key):
        if kg.distances.get(e.target) == d - 1 and e.derivation not in seen:
            seen.add(e.derivation)
            found.append(e.derivation)
    found.sort(key=lambda dv: (render(dv.derived), dv.rule.value, tuple(render(p) for p in dv.parents)))
    return found


def derivational_depth(kg: KnowledgeGraph, state: ProofState, target: Formula) -> int | None:
    """Minimum edges from the state until some reachable state contains target.

    0 when the target is already present (premises included), None when no
    reachable state contains it.
    """
    key = _require_node(kg, state)
    if target in state.statements():
        return 0
    seen = {key}
    queue: deque[tuple[StateKey, int]] = deque([(key, 0)])
    while queue:
        current, depth = queue.popleft()
        for e in kg.edges_from(current):
            if e.target in seen:
                continue
            if e.derivation.derived == target:
                return depth + 1
            seen.add(e.target)
            queue.append((e.target, depth + 1))
    return None


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def key_string(key: StateKey) -> str:
    """Stable node identity: sorted, '|'-joined canonical renderings."""
    return "|".join(sorted(render(f) for f in key))


def kg_to_dict(kg: KnowledgeGraph) -> dict:
    def edge_dict(e: Edge) -> dict:
        return {
            "from": key_string(e.source),
            "to": key_string(e.target),
            "derived": render(e.derivation.derived),
            "rule": e.derivation.rule.value,
            "parents": [render(p) for p in e.derivation.parents],
        }

    return {
        "format_version": KG_FORMAT_VERSION,
        "problem": {
            "id": kg.problem.id,
            "level": kg.problem.level,
            "premises": [render(p) for p in kg.problem.premises],
            "conclusion": render(kg.problem.conclusion),
        },
        "config": {
            "max_derived_complexity": kg.config.max_derived_complexity,
            "addition_vocabulary": sorted(render(f) for f in kg.config.addition_vocabulary),
            "rewrite_depth_limit": kg.config.rewrite_depth_limit,
        },
        "bounds": {
            "max_nodes": kg.bounds.max_nodes,
            "max_intermediates": kg.bounds.max_intermediates,
        },
        "truncated": kg.truncated,
        "witness_injected": kg.witness_injected,
        "nodes": sorted((sorted(render(f) for f in key) for key in kg.nodes), key="|".join),
        "edges": sorted(
            (edge_dict(e) for e in kg.edges),
            key=lambda d: (d["from"], d["to"], d["rule"], d["derived"], tuple(d["parents"])),
        ),
        "goal_keys": sorted(key_string(k) for k in kg.goal_keys),
        "distances": {
            key_string(k): v
            for k, v in sorted(kg.distances.items(), key=lambda kv: key_string(kv[0]))
        },
    }


def kg_from_dict(doc: dict) -> KnowledgeGraph:
    if doc.get("format_version") != KG_FORMAT_VERSION:
        raise ValueError(f"unsupported KG format_version: {doc.get('format_version')!r}")
    p = doc["problem"]
    problem = ProofProblem(
        id=p["id"],
        premises=tuple(parse(s) for s in p["premises"]),
        conclusion=parse(p["conclusion"]),
        level=p["level"],
    )
    config = EnumerationConfig(
        max_derived_complexity=doc["config"]["max_derived_complexity"],
        addition_vocabulary=frozenset(parse(s) for s in doc["config"]["addition_vocabulary"]),
        rewrite_depth_limit=doc["config"]["rewrite_depth_limit"],
    )
    bounds = BuildBounds(**doc["bounds"])
    nodes = [frozenset(parse(s) for s in stmts) for stmts in doc["nodes"]]
    by_string = {key_string(k): k for k in nodes}
    edges = [
        Edge(
            by_string[e["from"]],
            by_string[e["to"]],
            Derivation(parse(e["derived"]), RuleId(e["rule"]), tuple(parse(s) for s in e["parents"])),
        )
        for e in doc["edges"]
    ]
    return KnowledgeGraph(
        problem=problem,
        config=config,
        bounds=bounds,
        nodes=nodes,
        edges=edges,
        goal_keys=frozenset(by_string[k] for k in doc["goal_keys"]),
        distances={by_string[k]: v for k, v in doc["distances"].items()},
        truncated=doc["truncated"],
        witness_injected=doc["witness_injected"],
    )


def save_kg(kg: KnowledgeGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(kg_to_dict(kg), fh, indent=1)
        fh.write("\n")


def load_kg(path) -> KnowledgeGraph:
    with open(path, encoding="utf-8") as fh:
        return kg_from_dict(json.load(fh))
