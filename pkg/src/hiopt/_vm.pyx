# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stack machine for postfix expression programs.

Opcode and error numbering must match ``hiopt._opcodes``.
"""

from libc.math cimport fabs, sqrt, pow, floor
from libc.stdlib cimport malloc, free

cdef enum:
    OP_CONST = 0
    OP_VAR = 1
    OP_NEG = 2
    OP_ABS = 3
    OP_SQRT = 4
    OP_SIGN = 5
    OP_ADD = 6
    OP_SUB = 7
    OP_MUL = 8
    OP_DIV = 9
    OP_POWI = 10
    OP_POWF = 11
    OP_SPOW = 12
    OP_APOW = 13
    OP_STORE = 14
    OP_SAVE = 15
    OP_LOAD = 16

cdef enum:
    ERR_DIV_ZERO = 1
    ERR_NEG_BASE = 2
    ERR_SQRT_NEG = 3
    ERR_ZERO_NEG_POW = 4


cdef inline double _sign(double v) nogil:
    if v > 0:
        return 1.0
    if v < 0:
        return -1.0
    return 0.0


cdef inline double _powi(double a, double q) noexcept nogil:
    # exponentiation by squaring for small integer exponents
    cdef long n = <long>q
    cdef double r = 1.0
    cdef bint inv = n < 0
    if q != <double>n or n > 64 or n < -64:
        return pow(a, q)
    if inv:
        n = -n
    while n:
        if n & 1:
            r *= a
        a *= a
        n >>= 1
    return 1.0 / r if inv else r


cdef int _run_point(const int* ops, const double* args, Py_ssize_t nops,
                    const double[:, ::1] X, Py_ssize_t row,
                    double* stack, double* regs, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t k
    cdef int sp = 0
    cdef int op
    cdef double a, b, q
    for k in range(nops):
        op = ops[k]
        if op == OP_CONST:
            stack[sp] = args[k]
            sp += 1
        elif op == OP_VAR:
            stack[sp] = X[row, <Py_ssize_t>args[k]]
            sp += 1
        elif op == OP_LOAD:
            stack[sp] = regs[<Py_ssize_t>args[k]]
            sp += 1
        elif op == OP_SAVE:
            regs[<Py_ssize_t>args[k]] = stack[sp - 1]
        elif op == OP_STORE:
            sp -= 1
            out[row, <Py_ssize_t>args[k]] = stack[sp]
        elif op == OP_NEG:
            stack[sp - 1] = -stack[sp - 1]
        elif op == OP_ABS:
            stack[sp - 1] = fabs(stack[sp - 1])
        elif op == OP_SQRT:
            a = stack[sp - 1]
            if a < 0:
                return ERR_SQRT_NEG
            stack[sp - 1] = sqrt(a)
        elif op == OP_SIGN:
            stack[sp - 1] = _sign(stack[sp - 1])
        elif op <= OP_DIV:
            b = stack[sp - 1]
            a = stack[sp - 2]
            sp -= 1
            if op == OP_ADD:
                stack[sp - 1] = a + b
            elif op == OP_SUB:
                stack[sp - 1] = a - b
            elif op == OP_MUL:
                stack[sp - 1] = a * b
            else:
                if b == 0:
                    return ERR_DIV_ZERO
                stack[sp - 1] = a / b
        else:
            a = stack[sp - 1]
            q = args[k]
            if op == OP_POWI:
                if a == 0 and q < 0:
                    return ERR_ZERO_NEG_POW
                stack[sp - 1] = _powi(a, q)
            elif op == OP_POWF:
                if a < 0:
                    return ERR_NEG_BASE
                if a == 0 and q < 0:
                    return ERR_ZERO_NEG_POW
                stack[sp - 1] = pow(a, q)
            elif op == OP_SPOW:
                if a == 0 and q < 0:
                    return ERR_ZERO_NEG_POW
                if q == 0:
                    stack[sp - 1] = _sign(a)
                else:
                    stack[sp - 1] = _sign(a) * pow(fabs(a), q)
            else:
                if a == 0 and q < 0:
                    return ERR_ZERO_NEG_POW
                if q == 0:
                    stack[sp - 1] = 1.0
                else:
                    stack[sp - 1] = pow(fabs(a), q)
    return 0


def run_program(const int[::1] ops, const double[::1] args,
                const double[:, ::1] X, double[:, ::1] out, int stack_size,
                int n_regs=0):
    """Evaluate a program at every row of ``X``; ``OP_STORE`` writes columns of ``out``.

    Returns ``(0, -1)`` on success, else ``(code, row)`` for the first
    failing row.
    """
    cdef Py_ssize_t m = X.shape[0]
    cdef Py_ssize_t nops = ops.shape[0]
    cdef Py_ssize_t row
    cdef int code = 0
    cdef Py_ssize_t bad = -1
    cdef double* stack = <double*>malloc(sizeof(double) * (stack_size + n_regs + 1))
    if stack == NULL:
        raise MemoryError()
    try:
        with nogil:
            for row in range(m):
                code = _run_point(&ops[0], &args[0], nops, X, row, stack,
                                  stack + stack_size, out)
                if code != 0:
                    bad = row
                    break
    finally:
        free(stack)
    return code, bad
