"""Step complexity: weighted, depth-penalized count of logical operators.

Each operator occurrence contributes weight(kind) * alpha ** depth, where
the root operator sits at depth 0 and depth grows by one per nesting
level. Variables contribute nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from .formula import (
    Biconditional,
    Conjunction,
    Disjunction,
    Formula,
    Implication,
    Negation,
    Variable,
)

__all__ = ["ComplexityConstants", "DEFAULT_CONSTANTS", "step_complexity"]

_DEFAULT_WEIGHTS = MappingProxyType(
    {
        "negation": 0.5,
        "conjunction": 1.0,
        "disjunction": 1.0,
        "implication": 1.5,
        "biconditional": 2.0,
    }
)

_KIND_OF = {
    Negation: "negation",
    Conjunction: "conjunction",
    Disjunction: "disjunction",
    Implication: "implication",
    Biconditional: "biconditional",
}


@dataclass(frozen=True)
class ComplexityConstants:
    """Injectable operator weights and nesting penalty (alpha > 1)."""

    weights: Mapping[str, float] = field(default_factory=lambda: _DEFAULT_WEIGHTS)
    alpha: float = 1.5

    def __post_init__(self) -> None:
        if self.alpha <= 1:
            raise ValueError(f"alpha must exceed 1, got {self.alpha}")
        missing = set(_DEFAULT_WEIGHTS) - set(self.weights)
        if missing:
            raise ValueError(f"missing operator weights: {sorted(missing)}")
        bad = [k for k, w in self.weights.items() if w <= 0]
        if bad:
            raise ValueError(f"weights must be positive: {sorted(bad)}")


DEFAULT_CONSTANTS = ComplexityConstants()


def step_complexity(f: Formula, constants: ComplexityConstants = DEFAULT_CONSTANTS) -> float:
    """Sum of weight(op) * alpha**depth over every operator occurrence in f."""

    weights = constants.weights
    alpha = constants.alpha

    def rec(node: Formula, depth: int) -> float:
        if isinstance(node, Variable):
            return 0.0
        score = weights[_KIND_OF[type(node)]] * alpha**depth
        if isinstance(node, Negation):
            return score + rec(node.child, depth + 1)
        if isinstance(node, Implication):
            return score + rec(node.antecedent, depth + 1) + rec(node.consequent, depth + 1)
        return score + rec(node.left, depth + 1) + rec(node.right, depth + 1)  # type: ignore[union-attr]

    return rec(f, 0)
