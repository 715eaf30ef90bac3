"""The closed inference-rule set, forward application, and justification.

Two rule families with different application semantics:

* Inference rules (MP, MT, Conj, Simp, Add, DS, HS, CD) consume whole
  statements and match at the top level only, in canonical premise order
  (the conditional or compound premise first).
* Equivalence rules (Impl, DN, CP, Com, Assoc, Dist, Equiv, DeM) rewrite
  exactly one subformula occurrence of a single parent, at any position
  up to the configured depth, in either direction.

Addition's introduced disjunct is drawn from a configured vocabulary so
that enumeration stays finite; results whose complexity exceeds the
configured cap are dropped.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .complexity import step_complexity
from .formula import (
    Biconditional,
    Conjunction,
    Disjunction,
    Formula,
    Implication,
    Negation,
    children,
    height,
    render,
    subformulas,
)

__all__ = [
    "RuleId",
    "Derivation",
    "EnumerationConfig",
    "DEFAULT_CONFIG",
    "ArityMismatch",
    "INFERENCE_RULES",
    "EQUIVALENCE_RULES",
    "rule_arity",
    "apply_rule",
    "applicable_derivations",
    "justify",
    "checking_config",
]


class RuleId(str, enum.Enum):
    """Rule identifiers; values are the serialization short names."""

    MP = "MP"
    MT = "MT"
    Conj = "Conj"
    Simp = "Simp"
    Add = "Add"
    DS = "DS"
    HS = "HS"
    Impl = "Impl"
    DN = "DN"
    CP = "CP"
    Com = "Com"
    Assoc = "Assoc"
    Dist = "Dist"
    CD = "CD"
    Equiv = "Equiv"
    DeM = "DeM"

    def __str__(self) -> str:
        return self.value


INFERENCE_RULES = (
    RuleId.MP,
    RuleId.MT,
    RuleId.Conj,
    RuleId.Simp,
    RuleId.Add,
    RuleId.DS,
    RuleId.HS,
    RuleId.CD,
)

EQUIVALENCE_RULES = (
    RuleId.Impl,
    RuleId.DN,
    RuleId.CP,
    RuleId.Com,
    RuleId.Assoc,
    RuleId.Dist,
    RuleId.Equiv,
    RuleId.DeM,
)

_ARITY = {
    RuleId.MP: 2,
    RuleId.MT: 2,
    RuleId.Conj: 2,
    RuleId.Simp: 1,
    RuleId.Add: 1,
    RuleId.DS: 2,
    RuleId.HS: 2,
    RuleId.CD: 2,
}
for _r in EQUIVALENCE_RULES:
    _ARITY[_r] = 1


class ArityMismatch(ValueError):
    """Raised when the parent count does not match the rule's arity."""


def rule_arity(rule: RuleId) -> int:
    return _ARITY[rule]


@dataclass(frozen=True)
class EnumerationConfig:
    """Bounds that keep forward enumeration finite."""

    max_derived_complexity: float = 12.0
    addition_vocabulary: frozenset[Formula] = frozenset()
    rewrite_depth_limit: int = 2

    def __post_init__(self) -> None:
        if not self.max_derived_complexity > 0:
            raise ValueError("max_derived_complexity must be positive")
        if self.rewrite_depth_limit < 0:
            raise ValueError("rewrite_depth_limit must be non-negative")


DEFAULT_CONFIG = EnumerationConfig()


@dataclass(frozen=True)
class Derivation:
    """One annotated step: derived statement, rule, and ordered parents."""

    derived: Formula
    rule: RuleId
    parents: tuple[Formula, ...]

    def __post_init__(self) -> None:
        if len(self.parents) != rule_arity(self.rule):
            raise ArityMismatch(
                f"{self.rule} takes {rule_arity(self.rule)} parent(s), got {len(self.parents)}"
            )
        if self.derived in self.parents:
            raise ValueError("a derivation must produce a new statement")

    def __str__(self) -> str:
        parents = ", ".join(render(p) for p in self.parents)
        return f"{render(self.derived)} [{self.rule}: {parents}]"


# ---------------------------------------------------------------------------
# Inference rules: whole-statement matching in canonical premise order
# ---------------------------------------------------------------------------

def _infer(rule: RuleId, parents: tuple[Formula, ...], config: EnumerationConfig) -> set[Formula]:
    out: set[Formula] = set()
    if rule is RuleId.MP:
        p, q = parents
        if isinstance(p, Implication) and q == p.antecedent:
            out.add(p.consequent)
    elif rule is RuleId.MT:
        p, q = parents
        if isinstance(p, Implication) and q == Negation(p.consequent):
            out.add(Negation(p.antecedent))
    elif rule is RuleId.Conj:
        p, q = parents
        out.add(Conjunction(p, q))
    elif rule is RuleId.Simp:
        (p,) = parents
        if isinstance(p, Conjunction):
            out.add(p.left)
            out.add(p.right)
    elif rule is RuleId.Add:
        (p,) = parents
        for q in config.addition_vocabulary:
            out.add(Disjunction(p, q))
    elif rule is RuleId.DS:
        p, q = parents
        if isinstance(p, Disjunction) and q == Negation(p.left):
            out.add(p.right)
    elif rule is RuleId.HS:
        p, q = parents
        if (
            isinstance(p, Implication)
            and isinstance(q, Implication)
            and p.consequent == q.antecedent
        ):
            out.add(Implication(p.antecedent, q.consequent))
    elif rule is RuleId.CD:
        p, q = parents
        if (
            isinstance(p, Conjunction)
            and isinstance(p.left, Implication)
            and isinstance(p.right, Implication)
            and isinstance(q, Disjunction)
            and q.left == p.left.antecedent
            and q.right == p.right.antecedent
        ):
            out.add(Disjunction(p.left.consequent, p.right.consequent))
    else:  # pragma: no cover
        raise AssertionError(rule)
    return out


# ---------------------------------------------------------------------------
# Equivalence rules: one-occurrence rewriting, both directions
# ---------------------------------------------------------------------------

def _rewrites_at(rule: RuleId, sub: Formula) -> list[Formula]:
    """All single-application rewrites of ``sub`` itself, both directions."""
    out: list[Formula] = []
    if rule is RuleId.Impl:
        if isinstance(sub, Implication):
            out.append(Disjunction(Negation(sub.antecedent), sub.consequent))
        if isinstance(sub, Disjunction) and isinstance(sub.left, Negation):
            out.append(Implication(sub.left.child, sub.right))
    elif rule is RuleId.DN:
        out.append(Negation(Negation(sub)))
        if isinstance(sub, Negation) and isinstance(sub.child, Negation):
            out.append(sub.child.child)
    elif rule is RuleId.CP:
        if isinstance(sub, Implication):
            out.append(Implication(Negation(sub.consequent), Negation(sub.antecedent)))
            if isinstance(sub.antecedent, Negation) and isinstance(sub.consequent, Negation):
                out.append(Implication(sub.consequent.child, sub.antecedent.child))
    elif rule is RuleId.Com:
        if isinstance(sub, Disjunction):
            out.append(Disjunction(sub.right, sub.left))
        if isinstance(sub, Conjunction):
            out.append(Conjunction(sub.right, sub.left))
    elif rule is RuleId.Assoc:
        if isinstance(sub, Disjunction):
            if isinstance(sub.left, Disjunction):
                out.append(Disjunction(sub.left.left, Disjunction(sub.left.right, sub.right)))
            if isinstance(sub.right, Disjunction):
                out.append(Disjunction(Disjunction(sub.left, sub.right.left), sub.right.right))
        if isinstance(sub, Conjunction):
            if isinstance(sub.left, Conjunction):
                out.append(Conjunction(sub.left.left, Conjunction(sub.left.right, sub.right)))
            if isinstance(sub.right, Conjunction):
                out.append(Conjunction(Conjunction(sub.left, sub.right.left), sub.right.right))
    elif rule is RuleId.Dist:
        if isinstance(sub, Conjunction) and isinstance(sub.right, Disjunction):
            out.append(
                Disjunction(
                    Conjunction(sub.left, sub.right.left),
                    Conjunction(sub.left, sub.right.right),
                )
            )
        if (
            isinstance(sub, Disjunction)
            and isinstance(sub.left, Conjunction)
            and isinstance(sub.right, Conjunction)
            and sub.left.left == sub.right.left
        ):
            out.append(Conjunction(sub.left.left, Disjunction(sub.left.right, sub.right.right)))
    elif rule is RuleId.Equiv:
        if isinstance(sub, Biconditional):
            out.append(
                Conjunction(
                    Implication(sub.left, sub.right),
                    Implication(sub.right, sub.left),
                )
            )
        if (
            isinstance(sub, Conjunction)
            and isinstance(sub.left, Implication)
            and isinstance(sub.right, Implication)
            and sub.left.antecedent == sub.right.consequent
            and sub.left.consequent == sub.right.antecedent
        ):
            out.append(Biconditional(sub.left.antecedent, sub.left.consequent))
    elif rule is RuleId.DeM:
        if isinstance(sub, Negation):
            inner = sub.child
            if isinstance(inner, Conjunction):
                out.append(Disjunction(Negation(inner.left), Negation(inner.right)))
            if isinstance(inner, Disjunction):
                out.append(Conjunction(Negation(inner.left), Negation(inner.right)))
        if (
            isinstance(sub, Disjunction)
            and isinstance(sub.left, Negation)
            and isinstance(sub.right, Negation)
        ):
            out.append(Negation(Conjunction(sub.left.child, sub.right.child)))
        if (
            isinstance(sub, Conjunction)
            and isinstance(sub.left, Negation)
            and isinstance(sub.right, Negation)
        ):
            out.append(Negation(Disjunction(sub.left.child, sub.right.child)))
    else:  # pragma: no cover
        raise AssertionError(rule)
    return out


def _occurrences(f: Formula, max_depth: int) -> list[tuple[tuple[int, ...], Formula]]:
    """(path, node) pairs for every occurrence at depth <= max_depth."""
    found: list[tuple[tuple[int, ...], Formula]] = []

    def rec(node: Formula, path: tuple[int, ...]) -> None:
        found.append((path, node))
        if len(path) < max_depth:
            for i, kid in enumerate(children(node)):
                rec(kid, path + (i,))

    rec(f, ())
    return found


def _replace(f: Formula, path: tuple[int, ...], new: Formula) -> Formula:
    if not path:
        return new
    idx, rest = path[0], path[1:]
    if isinstance(f, Negation):
        return Negation(_replace(f.child, rest, new))
    if isinstance(f, Implication):
        if idx == 0:
            return Implication(_replace(f.antecedent, rest, new), f.consequent)
        return Implication(f.antecedent, _replace(f.consequent, rest, new))
    if isinstance(f, (Conjunction, Disjunction, Biconditional)):
        ctor = type(f)
        if idx == 0:
            return ctor(_replace(f.left, rest, new), f.right)
        return ctor(f.left, _replace(f.right, rest, new))
    raise ValueError(f"path {path} does not exist in {f}")


def _rewrite(rule: RuleId, parent: Formula, config: EnumerationConfig) -> set[Formula]:
    out: set[Formula] = set()
    for path, sub in _occurrences(parent, config.rewrite_depth_limit):
        for replacement in _rewrites_at(rule, sub):
            out.add(_replace(parent, path, replacement))
    return out


def apply_rule(
    rule: RuleId, parents: list[Formula] | tuple[Formula, ...], config: EnumerationConfig = DEFAULT_CONFIG
) -> set[Formula]:
    """Every statement derivable from exactly these parents by one application.

    Raises ArityMismatch on a wrong parent count. Results above the
    configured complexity cap are dropped.
    """
    parents = tuple(parents)
    if len(parents) != rule_arity(rule):
        raise ArityMismatch(
            f"{rule} takes {rule_arity(rule)} parent(s), got {len(parents)}"
        )
    if rule in EQUIVALENCE_RULES:
        results = _rewrite(rule, parents[0], config)
    else:
        results = _infer(rule, parents, config)
    cap = config.max_derived_complexity
    if math.isinf(cap):
        return results
    return {f for f in results if step_complexity(f) <= cap}


def applicable_derivations(
    statements: set[Formula] | frozenset[Formula], config: EnumerationConfig = DEFAULT_CONFIG
) -> list[Derivation]:
    """One frontier layer of forward chaining from the given statements.

    Unions apply_rule over every rule and every ordered parent selection
    (repetition allowed for Conj only), drops derivations whose statement
    is already present, and orders the result by (rule name, rendered
    derived statement, rendered parents).
    """
    if not statements:
        raise ValueError("statements must be non-empty")
    ordered = sorted(statements, key=render)
    out: list[Derivation] = []

    def emit(rule: RuleId, parent_sel: tuple[Formula, ...]) -> None:
        for derived in apply_rule(rule, parent_sel, config):
            if derived not in statements:
                out.append(Derivation(derived, rule, parent_sel))

    for rule in RuleId:
        if rule_arity(rule) == 1:
            for p in ordered:
                emit(rule, (p,))
        else:
            for p in ordered:
                for q in ordered:
                    if p is q and rule is not RuleId.Conj:
                        continue
                    emit(rule, (p, q))

    out.sort(key=lambda d: (d.rule.value, render(d.derived), tuple(render(p) for p in d.parents)))
    return out


def checking_config(step: Formula, parents: tuple[Formula, ...]) -> EnumerationConfig:
    """Permissive config for justification checks.

    Justification asks whether the claimed rule and parents actually
    produce the step, so enumeration bounds are lifted: the complexity cap
    is infinite, Addition may introduce any subformula of the step, and
    rewrites may touch any depth of the parent.
    """
    depth = max((height(p) for p in parents), default=0)
    return EnumerationConfig(
        max_derived_complexity=math.inf,
        addition_vocabulary=frozenset(subformulas(step)),
        rewrite_depth_limit=depth,
    )


def justify(
    step: Formula,
    rule: RuleId,
    parents: list[Formula] | tuple[Formula, ...],
    available: set[Formula] | frozenset[Formula],
    config: EnumerationConfig | None = None,
) -> bool:
    """True iff every parent is available and the rule maps the parents to the step.

    With config=None a permissive checking config is used (see
    checking_config); pass an explicit config to check against enumeration
    bounds instead. A wrong parent count is simply unjustified.
    """
    parents = tuple(parents)
    if any(p not in available for p in parents):
        return False
    if len(parents) != rule_arity(rule):
        return False
    cfg = config if config is not None else checking_config(step, parents)
    return step in apply_rule(rule, parents, cfg)
