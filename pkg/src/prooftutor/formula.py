"""Propositional formulas: AST, parser, renderer, and the truth-table oracle.

Formulas are immutable trees built from single-letter variables (A-Z) and
the five connectives. Structural equality is the only equality in the
system: ``(A + B)`` and ``(B + A)`` are distinct statements, and turning
one into the other takes an explicit rule application.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Mapping

__all__ = [
    "Formula",
    "Variable",
    "Negation",
    "Conjunction",
    "Disjunction",
    "Implication",
    "Biconditional",
    "Valuation",
    "ParseError",
    "TooManyVariables",
    "parse",
    "render",
    "subformulas",
    "variables",
    "evaluate",
    "entails",
    "MAX_ENTAILMENT_VARIABLES",
]

#: Assignment of truth values to variable names. Must cover every variable
#: occurring in the formulas being evaluated.
Valuation = Mapping[str, bool]

MAX_ENTAILMENT_VARIABLES = 20


class ParseError(ValueError):
    """Raised on malformed formula text. ``position`` is a 0-based offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class TooManyVariables(ValueError):
    """Raised when an entailment check would exceed the truth-table cap."""


class Formula:
    """Base class for all formula nodes. Instances are immutable and hashable."""

    __slots__ = ()

    def __str__(self) -> str:
        return render(self, "ascii")


@dataclass(frozen=True, slots=True)
class Variable(Formula):
    name: str

    def __post_init__(self) -> None:
        if len(self.name) != 1 or not ("A" <= self.name <= "Z"):
            raise ValueError(f"variable must be a single letter A-Z, got {self.name!r}")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Negation(Formula):
    child: Formula

    def __str__(self) -> str:
        return render(self, "ascii")


@dataclass(frozen=True, slots=True)
class Conjunction(Formula):
    left: Formula
    right: Formula

    def __str__(self) -> str:
        return render(self, "ascii")


@dataclass(frozen=True, slots=True)
class Disjunction(Formula):
    left: Formula
    right: Formula

    def __str__(self) -> str:
        return render(self, "ascii")


@dataclass(frozen=True, slots=True)
class Implication(Formula):
    antecedent: Formula
    consequent: Formula

    def __str__(self) -> str:
        return render(self, "ascii")


@dataclass(frozen=True, slots=True)
class Biconditional(Formula):
    left: Formula
    right: Formula

    def __str__(self) -> str:
        return render(self, "ascii")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_NOT_CHARS = {"~", "-", "¬"}          # ~  -  ¬
_AND_CHARS = {"*", "&", "∧"}          # *  &  ∧
_OR_CHARS = {"+", "|", "∨"}           # +  |  ∨
_IMPL_CHARS = {">", "→"}              # >  →
_IFF_CHARS = {"↔"}                    # ↔  (ascii form is the digraph <>)


class _Token:
    __slots__ = ("kind", "pos")

    def __init__(self, kind: str, pos: int):
        self.kind = kind
        self.pos = pos


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "(":
            tokens.append(_Token("(", i))
        elif ch == ")":
            tokens.append(_Token(")", i))
        elif "A" <= ch <= "Z":
            tokens.append(_Token("var:" + ch, i))
        elif ch in _NOT_CHARS:
            tokens.append(_Token("not", i))
        elif ch in _AND_CHARS:
            tokens.append(_Token("and", i))
        elif ch in _OR_CHARS:
            tokens.append(_Token("or", i))
        elif ch in _IMPL_CHARS:
            tokens.append(_Token("impl", i))
        elif ch in _IFF_CHARS:
            tokens.append(_Token("iff", i))
        elif ch == "<":
            if i + 1 < n and text[i + 1] == ">":
                tokens.append(_Token("iff", i))
                i += 1
            else:
                raise ParseError("expected '>' after '<'", i + 1)
        else:
            raise ParseError(f"unknown token {ch!r}", i)
        i += 1
    return tokens


class _Parser:
    """Recursive-descent parser.

    Precedence (loosest first): <>, >, +, *, ~. Implication and the
    biconditional associate to the right, conjunction and disjunction to
    the left. Fully parenthesized input never relies on precedence.
    """

    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def _peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _next(self, context: str) -> _Token:
        tok = self._peek()
        if tok is None:
            raise ParseError(f"unexpected end of input, expected {context}", len(self.text))
        self.pos += 1
        return tok

    def parse(self) -> Formula:
        f = self._iff()
        tok = self._peek()
        if tok is not None:
            raise ParseError("unexpected trailing input", tok.pos)
        return f

    def _iff(self) -> Formula:
        left = self._impl()
        tok = self._peek()
        if tok is not None and tok.kind == "iff":
            self.pos += 1
            return Biconditional(left, self._iff())
        return left

    def _impl(self) -> Formula:
        left = self._or()
        tok = self._peek()
        if tok is not None and tok.kind == "impl":
            self.pos += 1
            return Implication(left, self._impl())
        return left

    def _or(self) -> Formula:
        f = self._and()
        while True:
            tok = self._peek()
            if tok is None or tok.kind != "or":
                return f
            self.pos += 1
            f = Disjunction(f, self._and())

    def _and(self) -> Formula:
        f = self._unary()
        while True:
            tok = self._peek()
            if tok is None or tok.kind != "and":
                return f
            self.pos += 1
            f = Conjunction(f, self._unary())

    def _unary(self) -> Formula:
        tok = self._next("a formula")
        if tok.kind == "not":
            return Negation(self._unary())
        if tok.kind.startswith("var:"):
            return Variable(tok.kind[4:])
        if tok.kind == "(":
            inner = self._iff()
            closing = self._next("')'")
            if closing.kind != ")":
                raise ParseError("expected ')'", closing.pos)
            return inner
        if tok.kind == ")":
            raise ParseError("unbalanced ')'", tok.pos)
        raise ParseError("dangling operator", tok.pos)


def parse(text: str) -> Formula:
    """Parse formula text in either ascii or unicode notation.

    Raises ParseError (with offset) on empty input, unbalanced parentheses,
    unknown tokens, or dangling operators.
    """
    if not text.strip():
        raise ParseError("empty input", 0)
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_GLYPHS = {
    "ascii": {"not": "~", "and": "*", "or": "+", "impl": ">", "iff": "<>"},
    "unicode": {"not": "¬", "and": "∧", "or": "∨", "impl": "→", "iff": "↔"},
}


def render(f: Formula, style: str = "ascii") -> str:
    """Render fully parenthesized text; ``parse(render(f)) == f`` for both styles."""
    g = _GLYPHS[style]

    def rec(node: Formula) -> str:
        if isinstance(node, Variable):
            return node.name
        if isinstance(node, Negation):
            return g["not"] + rec(node.child)
        if isinstance(node, Conjunction):
            return f"({rec(node.left)} {g['and']} {rec(node.right)})"
        if isinstance(node, Disjunction):
            return f"({rec(node.left)} {g['or']} {rec(node.right)})"
        if isinstance(node, Implication):
            return f"({rec(node.antecedent)} {g['impl']} {rec(node.consequent)})"
        if isinstance(node, Biconditional):
            return f"({rec(node.left)} {g['iff']} {rec(node.right)})"
        raise TypeError(f"not a formula: {node!r}")

    return rec(f)


# ---------------------------------------------------------------------------
# Traversal and semantics
# ---------------------------------------------------------------------------

def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, Variable):
        return ()
    if isinstance(f, Negation):
        return (f.child,)
    if isinstance(f, Implication):
        return (f.antecedent, f.consequent)
    return (f.left, f.right)  # type: ignore[union-attr]


def _preorder(f: Formula) -> Iterator[Formula]:
    stack = [f]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def subformulas(f: Formula) -> list[Formula]:
    """All distinct subtrees of f, including f itself, in pre-order."""
    seen: dict[Formula, None] = {}
    for node in _preorder(f):
        if node not in seen:
            seen[node] = None
    return list(seen)


def variables(f: Formula) -> frozenset[str]:
    return frozenset(node.name for node in _preorder(f) if isinstance(node, Variable))


def height(f: Formula) -> int:
    kids = children(f)
    if not kids:
        return 0
    return 1 + max(height(k) for k in kids)


def evaluate(f: Formula, valuation: Valuation) -> bool:
    if isinstance(f, Variable):
        return valuation[f.name]
    if isinstance(f, Negation):
        return not evaluate(f.child, valuation)
    if isinstance(f, Conjunction):
        return evaluate(f.left, valuation) and evaluate(f.right, valuation)
    if isinstance(f, Disjunction):
        return evaluate(f.left, valuation) or evaluate(f.right, valuation)
    if isinstance(f, Implication):
        return (not evaluate(f.antecedent, valuation)) or evaluate(f.consequent, valuation)
    if isinstance(f, Biconditional):
        return evaluate(f.left, valuation) == evaluate(f.right, valuation)
    raise TypeError(f"not a formula: {f!r}")


def entails(premises: frozenset[Formula] | set[Formula], goal: Formula) -> bool:
    """Semantic entailment by exhaustive truth-table enumeration.

    True iff every valuation satisfying all premises satisfies the goal.
    Raises TooManyVariables beyond MAX_ENTAILMENT_VARIABLES distinct variables.
    """
    names = sorted(frozenset().union(*(variables(p) for p in premises), variables(goal)))
    if len(names) > MAX_ENTAILMENT_VARIABLES:
        raise TooManyVariables(
            f"{len(names)} variables exceeds the {MAX_ENTAILMENT_VARIABLES}-variable cap"
        )
    for bits in itertools.product((False, True), repeat=len(names)):
        valuation = dict(zip(names, bits))
        if all(evaluate(p, valuation) for p in premises) and not evaluate(goal, valuation):
            return False
    return True
