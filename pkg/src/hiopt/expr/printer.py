"""Render an AST back into parseable text.

Binary operations are always parenthesized, so ``parse(to_text(e)) == e``
for every AST whose numeric literals are nonnegative (which is all the
parser and the differentiator ever produce).
"""

from __future__ import annotations

from fractions import Fraction

from . import nodes as N

_BIN = {N.Add: "+", N.Sub: "-", N.Mul: "*", N.Div: "/"}
_FUN = {N.Abs: "abs", N.Sqrt: "sqrt", N.Sign: "sign"}
_QFUN = {N.SPow: "spow", N.APow: "apow"}


def format_rational(q: Fraction) -> str:
    if q.denominator == 1 and q >= 0:
        return str(q.numerator)
    if q.denominator == 1:
        return f"({q.numerator})"
    return f"({q.numerator}/{q.denominator})"


def _num(v: float) -> str:
    if v < 0:
        return f"(-{_num(-v)})"
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


def to_text(e: N.Expr) -> str:
    if isinstance(e, N.Num):
        return _num(e.value)
    if isinstance(e, N.Var):
        return e.name
    if isinstance(e, N.Neg):
        return f"(-{to_text(e.arg)})"
    if type(e) in _FUN:
        return f"{_FUN[type(e)]}({to_text(e.arg)})"
    if type(e) in _BIN:
        return f"({to_text(e.left)} {_BIN[type(e)]} {to_text(e.right)})"
    if isinstance(e, N.Pow):
        base = to_text(e.base)
        if isinstance(e.base, N.Pow):
            base = f"({base})"
        return f"{base}^{format_rational(e.q)}"
    if type(e) in _QFUN:
        return f"{_QFUN[type(e)]}({to_text(e.base)}, {format_rational(e.q)})"
    raise TypeError(f"not an expression node: {e!r}")
