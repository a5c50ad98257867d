"""Expression language: parsing, printing, evaluation and differentiation.

Grammar (lowest precedence first)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' rational)?
    atom    := number | x1..xn | t | func '(' expr [',' rational] ')' | '(' expr ')'
    func    := abs | sqrt | sign | spow | apow | pow

``spow(e, q) = sign(e)|e|^q`` and ``apow(e, q) = |e|^q``. Plain ``^`` with a
non-integer exponent requires a nonnegative base at evaluation time.
"""

from __future__ import annotations

import numpy as np

from .. import backend
from .diff import diff
from .nodes import (
    Abs,
    Add,
    APow,
    Div,
    Expr,
    Mul,
    Neg,
    Num,
    Pow,
    Sign,
    SPow,
    Sqrt,
    Sub,
    Var,
    free_vars,
    size,
)
from .parser import ParseError, parse, parse_predicate
from .predicate import CompiledPredicate
from .printer import to_text
from .program import ERROR_MESSAGES, Program, compile_expr, compile_many

__all__ = [
    "Abs", "Add", "APow", "Compiled", "CompiledPredicate", "CompiledVector", "Div", "EvalError",
    "Expr", "Mul", "Neg", "Num", "ParseError", "Pow", "Program", "Sign",
    "SPow", "Sqrt", "Sub", "Var", "diff", "evaluate", "free_vars", "parse",
    "parse_predicate", "size", "to_text",
]


class EvalError(ArithmeticError):
    """Evaluation failed; ``point`` maps variable names to the bad values."""

    def __init__(self, message: str, point: dict[str, float] | None = None):
        self.message = message
        self.point = point or {}
        where = ", ".join(f"{k}={v!r}" for k, v in self.point.items())
        super().__init__(f"{message} at ({where})" if where else message)


def _run(program: Program, variables, X) -> np.ndarray:
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    out = np.empty((X.shape[0], program.n_outputs))
    p = program
    code, row = backend.run_program(p.ops, p.args, X, out, p.stack_size, p.n_regs)
    if code:
        point = dict(zip(variables, X[row].tolist()))
        raise EvalError(ERROR_MESSAGES[code], point)
    return out


def _check_bound(exprs, variables):
    unbound = set().union(*(free_vars(e) for e in exprs)) - set(variables)
    if unbound:
        raise EvalError(f"unbound variable(s) {sorted(unbound)}")


class Compiled:
    """An expression compiled for batch evaluation.

    ``c(X)`` evaluates at every row of ``X`` (columns ordered as
    ``variables``) and raises :class:`EvalError` naming the first bad row.
    """

    def __init__(self, e: Expr, variables: tuple[str, ...]):
        _check_bound([e], variables)
        self.expr = e
        self.variables = tuple(variables)
        self.program = compile_expr(e, self.variables)

    def __call__(self, X) -> np.ndarray:
        return _run(self.program, self.variables, X)[:, 0]

    def __repr__(self) -> str:
        return f"Compiled({to_text(self.expr)!r})"


class CompiledVector:
    """Several expressions sharing one program; ``c(X)`` has shape ``(m, k)``."""

    def __init__(self, exprs, variables: tuple[str, ...], cse: bool = True):
        self.exprs = tuple(exprs)
        _check_bound(self.exprs, variables)
        self.variables = tuple(variables)
        self.program = compile_many(self.exprs, self.variables, cse=cse)

    def __len__(self) -> int:
        return len(self.exprs)

    def __call__(self, X) -> np.ndarray:
        return _run(self.program, self.variables, X)


def evaluate(e: Expr | str, env: dict[str, float]) -> float:
    """Evaluate ``e`` once with the bindings in ``env``."""
    if isinstance(e, str):
        e = parse(e)
    names = tuple(sorted(env))
    missing = free_vars(e) - set(names)
    if missing:
        raise EvalError(f"unbound variable(s) {sorted(missing)}")
    X = np.array([[float(env[k]) for k in names]])
    return float(Compiled(e, names)(X)[0])
