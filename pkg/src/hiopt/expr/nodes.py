"""AST node types for the expression language.

Nodes are frozen dataclasses, so structural equality and hashing come for
free. Exponents of the power nodes are exact ``Fraction`` values.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


class Expr:
    """Base class for all expression nodes."""

    __slots__ = ()

    def __str__(self) -> str:
        from .printer import to_text

        return to_text(self)

    # operator sugar, used when assembling Lie derivatives in code
    def __add__(self, other: Expr) -> Expr:
        return Add(self, _lift(other))

    def __radd__(self, other) -> Expr:
        return Add(_lift(other), self)

    def __sub__(self, other: Expr) -> Expr:
        return Sub(self, _lift(other))

    def __mul__(self, other: Expr) -> Expr:
        return Mul(self, _lift(other))

    def __rmul__(self, other) -> Expr:
        return Mul(_lift(other), self)

    def __truediv__(self, other: Expr) -> Expr:
        return Div(self, _lift(other))

    def __neg__(self) -> Expr:
        return Neg(self)


def _lift(v) -> Expr:
    if isinstance(v, Expr):
        return v
    return Num(float(v))


@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: float


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True)
class Abs(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True)
class Sqrt(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True)
class Sign(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    """``base ^ q``; a non-integer ``q`` needs a nonnegative base."""

    base: Expr
    q: Fraction


@dataclass(frozen=True, eq=True)
class SPow(Expr):
    """Signed power ``sign(base) * |base| ^ q``."""

    base: Expr
    q: Fraction


@dataclass(frozen=True, eq=True)
class APow(Expr):
    """Absolute power ``|base| ^ q``."""

    base: Expr
    q: Fraction


UNARY = (Neg, Abs, Sqrt, Sign)
BINARY = (Add, Sub, Mul, Div)
POWERS = (Pow, SPow, APow)


def children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, UNARY):
        return (e.arg,)
    if isinstance(e, BINARY):
        return (e.left, e.right)
    if isinstance(e, POWERS):
        return (e.base,)
    return ()


def free_vars(e: Expr) -> set[str]:
    out: set[str] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.name)
        stack.extend(children(node))
    return out


def size(e: Expr) -> int:
    n = 0
    stack = [e]
    while stack:
        node = stack.pop()
        n += 1
        stack.extend(children(node))
    return n
