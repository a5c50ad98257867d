"""Pure-numpy interpreter for postfix programs (fallback for ``_vm``)."""

from __future__ import annotations

import numpy as np

from ._opcodes import (
    ERR_DIV_ZERO,
    ERR_NEG_BASE,
    ERR_SQRT_NEG,
    ERR_ZERO_NEG_POW,
    OP_ABS,
    OP_ADD,
    OP_CONST,
    OP_LOAD,
    OP_SAVE,
    OP_DIV,
    OP_MUL,
    OP_NEG,
    OP_POWF,
    OP_POWI,
    OP_SIGN,
    OP_SPOW,
    OP_SQRT,
    OP_STORE,
    OP_SUB,
    OP_VAR,
)


def run_program(ops, args, X, out, stack_size, n_regs=0):
    """Same contract as the compiled ``hiopt._vm.run_program``."""
    m = X.shape[0]
    err = np.zeros(m, dtype=np.int8)
    stack: list[np.ndarray] = []
    cols: list[tuple[int, np.ndarray]] = []
    regs: dict[int, np.ndarray] = {}

    def flag(mask, code):
        err[(err == 0) & mask] = code

    with np.errstate(all="ignore"):
        for op, arg in zip(ops.tolist(), args.tolist()):
            if op == OP_CONST:
                stack.append(np.full(m, arg))
            elif op == OP_VAR:
                stack.append(X[:, int(arg)].copy())
            elif op == OP_LOAD:
                stack.append(regs[int(arg)])
            elif op == OP_SAVE:
                regs[int(arg)] = stack[-1]
            elif op == OP_STORE:
                cols.append((int(arg), stack.pop()))
            elif op == OP_NEG:
                stack[-1] = -stack[-1]
            elif op == OP_ABS:
                stack[-1] = np.abs(stack[-1])
            elif op == OP_SQRT:
                flag(stack[-1] < 0, ERR_SQRT_NEG)
                stack[-1] = np.sqrt(stack[-1])
            elif op == OP_SIGN:
                stack[-1] = np.sign(stack[-1])
            elif op <= OP_DIV:
                b = stack.pop()
                a = stack[-1]
                if op == OP_ADD:
                    stack[-1] = a + b
                elif op == OP_SUB:
                    stack[-1] = a - b
                elif op == OP_MUL:
                    stack[-1] = a * b
                else:
                    flag(b == 0, ERR_DIV_ZERO)
                    stack[-1] = a / b
            else:
                a = stack[-1]
                if arg < 0:
                    flag(a == 0, ERR_ZERO_NEG_POW)
                if op == OP_POWI:
                    stack[-1] = np.power(a, arg)
                elif op == OP_POWF:
                    flag(a < 0, ERR_NEG_BASE)
                    stack[-1] = np.power(a, arg)
                elif op == OP_SPOW:
                    if arg == 0:
                        stack[-1] = np.sign(a)
                    else:
                        stack[-1] = np.sign(a) * np.power(np.abs(a), arg)
                else:
                    if arg == 0:
                        stack[-1] = np.ones(m)
                    else:
                        stack[-1] = np.power(np.abs(a), arg)
    bad = np.flatnonzero(err)
    if bad.size:
        row = int(bad[0])
        # rows past the first failure are left untouched, as in the VM
        for c, v in cols:
            out[:row, c] = v[:row]
        return int(err[row]), row
    for c, v in cols:
        out[:, c] = v
    return 0, -1
