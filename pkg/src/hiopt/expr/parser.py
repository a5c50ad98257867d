"""Recursive-descent parser for expressions and predicates.

Precedence, lowest first: ``+ -``, ``* /``, unary minus, ``^``. The exponent
of ``^`` (and the second argument of ``spow``/``apow``/``pow``) must be a
rational literal. After ``^`` a fraction must be parenthesized: ``x^3``,
``x^-2``, ``x^0.5``, ``x^(4/3)``; ``x^4/3`` is ``(x^4)/3``. Function arguments
accept a bare fraction: ``apow(x, 4/3)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from . import nodes as N

_VAR_RE = re.compile(r"x[1-9][0-9]*\Z")
_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>>=|<=|==|!=|&&|\|\||[-+*/^(),<>!])"
    r")"
)
FUNCTIONS_1 = {"abs": N.Abs, "sqrt": N.Sqrt, "sign": N.Sign}
FUNCTIONS_Q = {"spow": N.SPow, "apow": N.APow, "pow": N.Pow}
KEYWORDS = {"and", "or", "not"}


class ParseError(ValueError):
    """Malformed expression text; ``position`` is a byte offset into it."""

    def __init__(self, text: str, char_pos: int, message: str):
        char_pos = max(0, min(char_pos, len(text)))
        self.position = len(text[:char_pos].encode("utf-8"))
        self.message = message
        self.text = text
        super().__init__(f"{message} at byte {self.position}: {text!r}")


@dataclass(frozen=True)
class Token:
    kind: str  # num | ident | op | end
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(text, pos, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append(Token(kind, m.group(kind), start))
        pos = m.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: frozenset[str] | None):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.variables = variables

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def accept(self, text: str) -> bool:
        if self.tok.kind in ("op", "ident") and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            self.fail(f"expected {text!r}")

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ParseError(self.text, tok.pos, f"{message}, found {found}")

    # -- arithmetic
    def expr(self) -> N.Expr:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            rhs = self.term()
            node = N.Add(node, rhs) if op == "+" else N.Sub(node, rhs)
        return node

    def term(self) -> N.Expr:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            rhs = self.unary()
            node = N.Mul(node, rhs) if op == "*" else N.Div(node, rhs)
        return node

    def unary(self) -> N.Expr:
        if self.accept("-"):
            return N.Neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> N.Expr:
        base = self.atom()
        if not self.accept("^"):
            return base
        return N.Pow(base, self.exponent_chain())

    def exponent_chain(self) -> Fraction:
        q = self.rational(bare_fraction=False)
        if self.accept("^"):
            # right-associative: a^b^c == a^(b^c)
            inner = self.exponent_chain()
            if inner.denominator != 1:
                self.fail("exponent tower must have integer upper exponents")
            try:
                q = q ** int(inner)
            except ZeroDivisionError:
                self.fail("zero raised to a negative power in exponent")
        return q

    def rational(self, bare_fraction: bool = True) -> Fraction:
        """Signed rational literal, optionally wrapped in parentheses.

        ``p/q`` without parentheses is accepted only if ``bare_fraction``.
        """
        if self.tok.kind == "op" and self.tok.text == "(":
            save = self.i
            self.i += 1
            if self._looks_like_rational():
                q = self.rational()
                self.expect(")")
                return q
            self.i = save
            self.fail("exponent must be a rational literal")
        sign = 1
        if self.accept("-"):
            sign = -1
        elif self.accept("+"):
            pass
        if self.tok.kind != "num":
            self.fail("exponent must be a rational literal")
        num = Fraction(self.tok.text)
        self.i += 1
        if (
            bare_fraction
            and self.tok.kind == "op"
            and self.tok.text == "/"
            and self.peek().kind == "num"
        ):
            self.i += 1
            den = Fraction(self.tok.text)
            if den == 0:
                self.fail("zero denominator in rational literal")
            self.i += 1
            num = num / den
        return sign * num

    def _looks_like_rational(self) -> bool:
        j = self.i
        if self.toks[j].kind == "op" and self.toks[j].text in "+-":
            j += 1
        if self.toks[j].kind != "num":
            return False
        j += 1
        if self.toks[j].kind == "op" and self.toks[j].text == "/":
            j += 1
            if self.toks[j].kind != "num":
                return False
            j += 1
        return self.toks[j].kind == "op" and self.toks[j].text == ")"

    def atom(self) -> N.Expr:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return N.Num(float(tok.text))
        if tok.kind == "ident":
            name = tok.text
            if name in FUNCTIONS_1 or name in FUNCTIONS_Q:
                self.i += 1
                self.expect("(")
                arg = self.expr()
                if name in FUNCTIONS_Q:
                    self.expect(",")
                    q = self.rational()
                    self.expect(")")
                    return FUNCTIONS_Q[name](arg, q)
                self.expect(")")
                return FUNCTIONS_1[name](arg)
            if name in KEYWORDS:
                self.fail("unexpected keyword")
            if not (_VAR_RE.match(name) or name == "t"):
                raise ParseError(self.text, tok.pos, f"unknown identifier {name!r}")
            if self.variables is not None and name not in self.variables:
                raise ParseError(self.text, tok.pos, f"unknown identifier {name!r}")
            self.i += 1
            return N.Var(name)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        self.fail("expected a number, variable, function or '('")

    # -- predicates
    def predicate(self):
        from .predicate import Or

        node = self.conj()
        while self.accept("or") or self.accept("||"):
            node = Or(node, self.conj())
        return node

    def conj(self):
        from .predicate import And

        node = self.negation()
        while self.accept("and") or self.accept("&&"):
            node = And(node, self.negation())
        return node

    def negation(self):
        from .predicate import Compare, Not

        if self.accept("not") or self.accept("!"):
            return Not(self.negation())
        if self.tok.kind == "op" and self.tok.text == "(":
            save = self.i
            self.i += 1
            try:
                inner = self.predicate()
                self.expect(")")
                return inner
            except ParseError:
                self.i = save
        lhs = self.expr()
        tok = self.tok
        if tok.kind == "op" and tok.text in ("<", "<=", ">", ">=", "==", "!="):
            self.i += 1
            return Compare(tok.text, lhs, self.expr())
        self.fail("expected a comparison operator")


def parse(text: str, variables=None) -> N.Expr:
    """Parse ``text`` into an :class:`Expr`.

    ``variables`` optionally restricts the admissible identifiers.
    """
    p = _Parser(text, frozenset(variables) if variables is not None else None)
    node = p.expr()
    if p.tok.kind != "end":
        p.fail("unexpected trailing input")
    return node


def parse_predicate(text: str, variables=None):
    p = _Parser(text, frozenset(variables) if variables is not None else None)
    node = p.predicate()
    if p.tok.kind != "end":
        p.fail("unexpected trailing input")
    return node
