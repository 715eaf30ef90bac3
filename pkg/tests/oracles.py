"""Independent oracle implementations used to cross-check the engine.

Everything here is written naively and separately from the production
code paths it checks: a literal per-rule pattern matcher, an exhaustive
state-space enumerator, and a Bellman-style distance table. Slow on
purpose; trusted because each piece is small enough to eyeball.
"""

from __future__ import annotations

import itertools

from prooftutor.complexity import step_complexity
from prooftutor.formula import (
    Biconditional,
    Conjunction,
    Disjunction,
    Implication,
    Negation,
)
from prooftutor.rules import RuleId


def _binary_parts(f):
    if isinstance(f, Implication):
        return f.antecedent, f.consequent
    if isinstance(f, (Conjunction, Disjunction, Biconditional)):
        return f.left, f.right
    return None


def _positions(f, limit, depth=0):
    yield (f, ())
    if depth >= limit:
        return
    if isinstance(f, Negation):
        for sub, path in _positions(f.child, limit, depth + 1):
            yield sub, (0,) + path
    parts = _binary_parts(f)
    if parts is not None:
        for i, part in enumerate(parts):
            for sub, path in _positions(part, limit, depth + 1):
                yield sub, (i,) + path


def _rebuild(f, path, replacement):
    if path == ():
        return replacement
    head, rest = path[0], path[1:]
    if isinstance(f, Negation):
        return Negation(_rebuild(f.child, rest, replacement))
    if isinstance(f, Implication):
        parts = [f.antecedent, f.consequent]
        parts[head] = _rebuild(parts[head], rest, replacement)
        return Implication(parts[0], parts[1])
    kind = type(f)
    parts = [f.left, f.right]
    parts[head] = _rebuild(parts[head], rest, replacement)
    return kind(parts[0], parts[1])


def _equiv_forms(rule, f):
    """All single rewrites of f itself under the given equivalence rule."""
    forms = []
    if rule is RuleId.Impl:
        if isinstance(f, Implication):
            forms.append(Disjunction(Negation(f.antecedent), f.consequent))
        if isinstance(f, Disjunction) and isinstance(f.left, Negation):
            forms.append(Implication(f.left.child, f.right))
    if rule is RuleId.DN:
        forms.append(Negation(Negation(f)))
        if isinstance(f, Negation) and isinstance(f.child, Negation):
            forms.append(f.child.child)
    if rule is RuleId.CP:
        if isinstance(f, Implication):
            forms.append(Implication(Negation(f.consequent), Negation(f.antecedent)))
            if isinstance(f.antecedent, Negation) and isinstance(f.consequent, Negation):
                forms.append(Implication(f.consequent.child, f.antecedent.child))
    if rule is RuleId.Com:
        if isinstance(f, Disjunction):
            forms.append(Disjunction(f.right, f.left))
        if isinstance(f, Conjunction):
            forms.append(Conjunction(f.right, f.left))
    if rule is RuleId.Assoc:
        if isinstance(f, Disjunction) and isinstance(f.left, Disjunction):
            forms.append(Disjunction(f.left.left, Disjunction(f.left.right, f.right)))
        if isinstance(f, Disjunction) and isinstance(f.right, Disjunction):
            forms.append(Disjunction(Disjunction(f.left, f.right.left), f.right.right))
        if isinstance(f, Conjunction) and isinstance(f.left, Conjunction):
            forms.append(Conjunction(f.left.left, Conjunction(f.left.right, f.right)))
        if isinstance(f, Conjunction) and isinstance(f.right, Conjunction):
            forms.append(Conjunction(Conjunction(f.left, f.right.left), f.right.right))
    if rule is RuleId.Dist:
        if isinstance(f, Conjunction) and isinstance(f.right, Disjunction):
            forms.append(
                Disjunction(Conjunction(f.left, f.right.left), Conjunction(f.left, f.right.right))
            )
        if (
            isinstance(f, Disjunction)
            and isinstance(f.left, Conjunction)
            and isinstance(f.right, Conjunction)
            and f.left.left == f.right.left
        ):
            forms.append(Conjunction(f.left.left, Disjunction(f.left.right, f.right.right)))
    if rule is RuleId.Equiv:
        if isinstance(f, Biconditional):
            forms.append(Conjunction(Implication(f.left, f.right), Implication(f.right, f.left)))
        if (
            isinstance(f, Conjunction)
            and isinstance(f.left, Implication)
            and isinstance(f.right, Implication)
            and f.left.antecedent == f.right.consequent
            and f.left.consequent == f.right.antecedent
        ):
            forms.append(Biconditional(f.left.antecedent, f.left.consequent))
    if rule is RuleId.DeM:
        if isinstance(f, Negation) and isinstance(f.child, Conjunction):
            forms.append(Disjunction(Negation(f.child.left), Negation(f.child.right)))
        if isinstance(f, Negation) and isinstance(f.child, Disjunction):
            forms.append(Conjunction(Negation(f.child.left), Negation(f.child.right)))
        if isinstance(f, Disjunction) and isinstance(f.left, Negation) and isinstance(f.right, Negation):
            forms.append(Negation(Conjunction(f.left.child, f.right.child)))
        if isinstance(f, Conjunction) and isinstance(f.left, Negation) and isinstance(f.right, Negation):
            forms.append(Negation(Disjunction(f.left.child, f.right.child)))
    return forms


def oracle_apply(rule, parents, vocabulary, depth_limit, complexity_cap):
    """What one rule application can produce: literal pattern matching."""
    results = set()
    if rule is RuleId.MP:
        a, b = parents
        if isinstance(a, Implication) and b == a.antecedent:
            results.add(a.consequent)
    elif rule is RuleId.MT:
        a, b = parents
        if isinstance(a, Implication) and b == Negation(a.consequent):
            results.add(Negation(a.antecedent))
    elif rule is RuleId.Conj:
        a, b = parents
        results.add(Conjunction(a, b))
    elif rule is RuleId.Simp:
        (a,) = parents
        if isinstance(a, Conjunction):
            results.update((a.left, a.right))
    elif rule is RuleId.Add:
        (a,) = parents
        results.update(Disjunction(a, q) for q in vocabulary)
    elif rule is RuleId.DS:
        a, b = parents
        if isinstance(a, Disjunction) and b == Negation(a.left):
            results.add(a.right)
    elif rule is RuleId.HS:
        a, b = parents
        if isinstance(a, Implication) and isinstance(b, Implication) and a.consequent == b.antecedent:
            results.add(Implication(a.antecedent, b.consequent))
    elif rule is RuleId.CD:
        a, b = parents
        if (
            isinstance(a, Conjunction)
            and isinstance(a.left, Implication)
            and isinstance(a.right, Implication)
            and isinstance(b, Disjunction)
            and b.left == a.left.antecedent
            and b.right == a.right.antecedent
        ):
            results.add(Disjunction(a.left.consequent, a.right.consequent))
    else:
        (a,) = parents
        for sub, path in _positions(a, depth_limit):
            for form in _equiv_forms(rule, sub):
                results.add(_rebuild(a, path, form))
    return {r for r in results if step_complexity(r) <= complexity_cap}


_UNARY = [RuleId.Simp, RuleId.Add] + [
    RuleId.Impl, RuleId.DN, RuleId.CP, RuleId.Com, RuleId.Assoc, RuleId.Dist, RuleId.Equiv, RuleId.DeM
]
_BINARY = [RuleId.MP, RuleId.MT, RuleId.Conj, RuleId.DS, RuleId.HS, RuleId.CD]


def oracle_frontier(statements, vocabulary, depth_limit, complexity_cap):
    """All (derived, rule, parents) triples one application away."""
    triples = set()
    statements = set(statements)
    for rule in _UNARY:
        for p in statements:
            for derived in oracle_apply(rule, (p,), vocabulary, depth_limit, complexity_cap):
                if derived not in statements:
                    triples.add((derived, rule, (p,)))
    for rule in _BINARY:
        for a, b in itertools.product(statements, repeat=2):
            if a == b and rule is not RuleId.Conj:
                continue
            for derived in oracle_apply(rule, (a, b), vocabulary, depth_limit, complexity_cap):
                if derived not in statements:
                    triples.add((derived, rule, (a, b)))
    return triples


class OracleSpace:
    """Exhaustive reachable-state table for one problem, built layer by layer."""

    def __init__(self, problem, vocabulary, depth_limit, complexity_cap, max_depth):
        self.problem = problem
        self.premises = frozenset(problem.premises)
        self.vocabulary = vocabulary
        self.depth_limit = depth_limit
        self.complexity_cap = complexity_cap
        self.max_depth = max_depth
        self.states = {frozenset()}
        self.edges = set()  # (from_key, to_key, derived)
        layer = [frozenset()]
        for depth in range(max_depth):
            nxt = []
            for key in layer:
                if problem.conclusion in key:
                    continue
                triples = oracle_frontier(
                    self.premises | key, vocabulary, depth_limit, complexity_cap
                )
                for derived, _rule, _parents in triples:
                    nk = key | {derived}
                    self.edges.add((key, nk, derived))
                    if nk not in self.states:
                        self.states.add(nk)
                        nxt.append(nk)
            layer = nxt
        self.dist = self._distances()

    def _distances(self):
        dist = {k: 0 for k in self.states if self.problem.conclusion in k}
        for _ in range(len(self.states)):
            changed = False
            for src, dst, _derived in self.edges:
                if dst in dist and dist.get(src, 10**9) > dist[dst] + 1:
                    dist[src] = dist[dst] + 1
                    changed = True
            if not changed:
                break
        return dist

    def classify(self, key, step):
        """(category, d_before, d_after) the slow way."""
        d_before = self.dist.get(key)
        matching = [e for e in self.edges if e[0] == key and e[2] == step]
        if not matching:
            return "Invalid", d_before, None
        target = key | {step}
        d_after = self.dist.get(target)
        if d_before is not None and d_after is not None and d_after == d_before - 1:
            return "Optimal", d_before, d_after
        return "ValidNonOptimal", d_before, d_after
