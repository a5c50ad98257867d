"""Flatten an AST into a postfix program for the evaluation kernels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._opcodes import (  # noqa: F401
    ERR_DIV_ZERO,
    ERR_NEG_BASE,
    ERR_SQRT_NEG,
    ERR_ZERO_NEG_POW,
    ERROR_MESSAGES,
    OP_ABS,
    OP_ADD,
    OP_APOW,
    OP_CONST,
    OP_DIV,
    OP_LOAD,
    OP_MUL,
    OP_NEG,
    OP_POWF,
    OP_POWI,
    OP_SAVE,
    OP_SIGN,
    OP_SPOW,
    OP_SQRT,
    OP_STORE,
    OP_SUB,
    OP_VAR,
)
from . import nodes as N

_UNARY = {N.Neg: OP_NEG, N.Abs: OP_ABS, N.Sqrt: OP_SQRT, N.Sign: OP_SIGN}
_BINARY = {N.Add: OP_ADD, N.Sub: OP_SUB, N.Mul: OP_MUL, N.Div: OP_DIV}


@dataclass(frozen=True)
class Program:
    ops: np.ndarray  # int32
    args: np.ndarray  # float64
    variables: tuple[str, ...]
    stack_size: int
    n_outputs: int = 1
    n_regs: int = 0

    def __len__(self) -> int:
        return len(self.ops)


def _shared_subtrees(exprs) -> set:
    """Non-leaf subtrees occurring more than once across ``exprs``."""
    seen: set = set()
    shared: set = set()
    work = list(exprs)
    while work:
        node = work.pop()
        if isinstance(node, (N.Num, N.Var)):
            continue
        if node in seen:
            shared.add(node)
            continue  # its children were already counted
        seen.add(node)
        work.extend(N.children(node))
    return shared


def compile_many(exprs, variables: tuple[str, ...], cse: bool = True) -> Program:
    """Compile several expressions into one program writing one column each.

    Repeated subtrees are evaluated once and cached in registers.
    """
    index = {name: i for i, name in enumerate(variables)}
    shared = _shared_subtrees(exprs) if cse else set()
    regs: dict = {}
    ops: list[int] = []
    args: list[float] = []
    depth = 0
    max_depth = 0
    for col, e in enumerate(exprs):
        # iterative post-order: (node, visited)
        work = [(e, False)]
        while work:
            node, visited = work.pop()
            if isinstance(node, N.Num):
                ops.append(OP_CONST)
                args.append(node.value)
                depth += 1
            elif isinstance(node, N.Var):
                if node.name not in index:
                    raise KeyError(f"unbound variable {node.name!r}")
                ops.append(OP_VAR)
                args.append(float(index[node.name]))
                depth += 1
            elif not visited and node in regs:
                ops.append(OP_LOAD)
                args.append(float(regs[node]))
                depth += 1
            elif not visited:
                work.append((node, True))
                for child in reversed(N.children(node)):
                    work.append((child, False))
                continue
            else:
                if type(node) in _UNARY:
                    ops.append(_UNARY[type(node)])
                    args.append(0.0)
                elif type(node) in _BINARY:
                    ops.append(_BINARY[type(node)])
                    args.append(0.0)
                    depth -= 1
                elif isinstance(node, N.Pow):
                    ops.append(OP_POWI if node.q.denominator == 1 else OP_POWF)
                    args.append(float(node.q))
                elif isinstance(node, N.SPow):
                    ops.append(OP_SPOW)
                    args.append(float(node.q))
                elif isinstance(node, N.APow):
                    ops.append(OP_APOW)
                    args.append(float(node.q))
                else:
                    raise TypeError(f"not an expression node: {node!r}")
                if node in shared and node not in regs:
                    regs[node] = len(regs)
                    ops.append(OP_SAVE)
                    args.append(float(regs[node]))
            max_depth = max(max_depth, depth)
        ops.append(OP_STORE)
        args.append(float(col))
        depth -= 1
    return Program(
        ops=np.asarray(ops, dtype=np.int32),
        args=np.asarray(args, dtype=np.float64),
        variables=tuple(variables),
        stack_size=max(max_depth, 1),
        n_outputs=len(exprs),
        n_regs=len(regs),
    )


def compile_expr(e: N.Expr, variables: tuple[str, ...]) -> Program:
    """Compile ``e`` against the column order given by ``variables``."""
    return compile_many([e], variables)
