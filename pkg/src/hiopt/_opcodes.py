"""Opcode and error numbering shared by the program compiler and kernels."""

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
OP_STORE = 14  # pop into output column ``arg``
OP_SAVE = 15  # copy top of stack into register ``arg``
OP_LOAD = 16  # push register ``arg``

ERR_DIV_ZERO = 1
ERR_NEG_BASE = 2
ERR_SQRT_NEG = 3
ERR_ZERO_NEG_POW = 4

ERROR_MESSAGES = {
    ERR_DIV_ZERO: "division by zero",
    ERR_NEG_BASE: "negative base raised to a non-integer power",
    ERR_SQRT_NEG: "square root of a negative number",
    ERR_ZERO_NEG_POW: "zero raised to a negative power",
}
