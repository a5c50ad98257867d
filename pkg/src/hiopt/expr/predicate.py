"""Boolean predicates built from comparisons of expressions."""

from __future__ import annotations

import operator
from dataclasses import dataclass

import numpy as np

from .nodes import Expr, free_vars
from .printer import to_text

_CMP = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "==": operator.eq,
    "!=": operator.ne,
}


@dataclass(frozen=True)
class Compare:
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class And:
    left: object
    right: object


@dataclass(frozen=True)
class Or:
    left: object
    right: object


@dataclass(frozen=True)
class Not:
    arg: object


def predicate_text(p) -> str:
    if isinstance(p, Compare):
        return f"{to_text(p.left)} {p.op} {to_text(p.right)}"
    if isinstance(p, And):
        return f"({predicate_text(p.left)} and {predicate_text(p.right)})"
    if isinstance(p, Or):
        return f"({predicate_text(p.left)} or {predicate_text(p.right)})"
    if isinstance(p, Not):
        return f"not ({predicate_text(p.arg)})"
    raise TypeError(p)


def predicate_vars(p) -> set[str]:
    if isinstance(p, Compare):
        return free_vars(p.left) | free_vars(p.right)
    if isinstance(p, Not):
        return predicate_vars(p.arg)
    return predicate_vars(p.left) | predicate_vars(p.right)


class CompiledPredicate:
    """Vectorized predicate: ``pred(X)`` returns a boolean array."""

    def __init__(self, p, variables: tuple[str, ...], text: str | None = None):
        from . import Compiled

        self.tree = p
        self.text = text if text is not None else predicate_text(p)
        self._leaves: dict[Expr, Compiled] = {}
        self._variables = variables

        def collect(node):
            if isinstance(node, Compare):
                for side in (node.left, node.right):
                    if side not in self._leaves:
                        self._leaves[side] = Compiled(side, variables)
            elif isinstance(node, Not):
                collect(node.arg)
            else:
                collect(node.left)
                collect(node.right)

        collect(p)

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        values = {e: c(X) for e, c in self._leaves.items()}

        def ev(node):
            if isinstance(node, Compare):
                return _CMP[node.op](values[node.left], values[node.right])
            if isinstance(node, Not):
                return ~ev(node.arg)
            if isinstance(node, And):
                return ev(node.left) & ev(node.right)
            return ev(node.left) | ev(node.right)

        return np.asarray(ev(self.tree), dtype=bool)
