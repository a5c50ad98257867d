"""Symbolic differentiation.

The smart constructors below only drop literal zeros and ones; there is no
general simplifier, so derivatives can grow large.
"""

from __future__ import annotations

from fractions import Fraction

from . import nodes as N

ZERO = N.Num(0.0)
ONE = N.Num(1.0)


def _is(e: N.Expr, v: float) -> bool:
    return isinstance(e, N.Num) and e.value == v


def add(a: N.Expr, b: N.Expr) -> N.Expr:
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return N.Add(a, b)


def sub(a: N.Expr, b: N.Expr) -> N.Expr:
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    return N.Sub(a, b)


def neg(a: N.Expr) -> N.Expr:
    if _is(a, 0.0):
        return ZERO
    if isinstance(a, N.Neg):
        return a.arg
    return N.Neg(a)


def mul(a: N.Expr, b: N.Expr) -> N.Expr:
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    return N.Mul(a, b)


def div(a: N.Expr, b: N.Expr) -> N.Expr:
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return N.Div(a, b)


def const(q: Fraction | float) -> N.Expr:
    """Literal for ``q``; negative values become ``Neg(Num)``."""
    v = float(q)
    return neg(N.Num(-v)) if v < 0 else N.Num(v)


def diff(e: N.Expr, var: str) -> N.Expr:
    """Derivative of ``e`` with respect to variable ``var``."""
    if isinstance(e, N.Num):
        return ZERO
    if isinstance(e, N.Var):
        return ONE if e.name == var else ZERO
    if isinstance(e, N.Neg):
        return neg(diff(e.arg, var))
    if isinstance(e, N.Add):
        return add(diff(e.left, var), diff(e.right, var))
    if isinstance(e, N.Sub):
        return sub(diff(e.left, var), diff(e.right, var))
    if isinstance(e, N.Mul):
        da, db = diff(e.left, var), diff(e.right, var)
        return add(mul(da, e.right), mul(e.left, db))
    if isinstance(e, N.Div):
        da, db = diff(e.left, var), diff(e.right, var)
        if _is(db, 0.0):
            return div(da, e.right)
        return div(sub(mul(da, e.right), mul(e.left, db)), N.Pow(e.right, Fraction(2)))
    if isinstance(e, N.Sign):
        return ZERO
    du = diff(e.arg if not isinstance(e, N.POWERS) else e.base, var)
    if _is(du, 0.0):
        return ZERO
    if isinstance(e, N.Abs):
        return mul(N.Sign(e.arg), du)
    if isinstance(e, N.Sqrt):
        return div(du, mul(N.Num(2.0), e))
    q = e.q
    if q == 0:
        return ZERO
    if isinstance(e, N.Pow):
        outer = ONE if q == 1 else N.Pow(e.base, q - 1)
    elif isinstance(e, N.SPow):
        # d/du sign(u)|u|^q = q |u|^(q-1)
        outer = ONE if q == 1 else N.APow(e.base, q - 1)
    elif isinstance(e, N.APow):
        # d/du |u|^q = q sign(u)|u|^(q-1)
        outer = N.Sign(e.base) if q == 1 else N.SPow(e.base, q - 1)
    else:
        raise TypeError(f"not an expression node: {e!r}")
    coeff = ONE if q == 1 else const(q)
    return mul(mul(coeff, outer), du)
