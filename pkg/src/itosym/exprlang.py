"""Small arithmetic expression language for drift/noise/coefficient formulas.

Grammar (EBNF, whitespace insignificant, identifiers case-sensitive):

    expr    = term   { ("+" | "-") term } ;
    term    = unary  { ("*" | "/") unary } ;
    unary   = "-" unary | power ;
    power   = atom [ "^" unary ] ;            (* right-associative *)
    atom    = NUMBER
            | IDENT "(" expr { "," expr } ")" (* exp log sin cos sqrt pow *)
            | IDENT                           (* variable or named constant *)
            | "(" expr ")" ;
    NUMBER  = digits [ "." digits ] [ ("e"|"E") ["+"|"-"] digits ] ;
    IDENT   = letter | "_" , { letter | digit | "_" } ;

Precedence is ^  >  unary -  >  * /  >  + -, so "-x^2" means -(x^2) and
"2^3^2" means 2^(3^2) = 512.  Trees are immutable; eval is pure.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping

from . import numdiff

FUNCTIONS = {"exp": 1, "log": 1, "sin": 1, "cos": 1, "sqrt": 1, "pow": 2}


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError):
    """Syntax or unknown-identifier error, with byte offset into the source."""

    def __init__(self, message: str, pos: int, expected: Iterable[str] = ()):
        self.pos = pos
        self.expected = sorted(expected)
        detail = f"{message} at offset {pos}"
        if self.expected:
            detail += " (expected: " + ", ".join(self.expected) + ")"
        super().__init__(detail)


class ExprDomainError(ExprError):
    """Evaluation left a function's domain; carries the offending subtree."""

    def __init__(self, message: str, subexpr: "Expr"):
        self.subexpr = subexpr
        super().__init__(f"{message} in '{to_source(subexpr)}'")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * / ^
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple["Expr", ...]


Expr = Num | Var | Neg | Bin | Call

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            stripped = source[pos:].lstrip()
            if not stripped:
                break
            bad = pos + (len(source[pos:]) - len(stripped))
            raise ExprSyntaxError(f"unexpected character {source[bad]!r}", bad)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, allowed_names: Iterable[str] | None):
        self.source = source
        self.tokens = _tokenize(source)
        self.idx = 0
        self.allowed = None if allowed_names is None else set(allowed_names)

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.idx]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok

    def expect_op(self, text: str) -> None:
        kind, val, pos = self.peek()
        if kind != "op" or val != text:
            raise ExprSyntaxError(f"unexpected token {val or 'end of input'!r}", pos,
                                  expected={text})
        self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"trailing input {val!r}", pos,
                                  expected={"+", "-", "*", "/", "^", "end of input"})
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                e = Bin(val, e, self.term())
            else:
                return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                e = Bin(val, e, self.unary())
            else:
                return e

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            return Bin("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, val, pos = self.advance()
        if kind == "num":
            return Num(float(val))
        if kind == "ident":
            nkind, nval, _ = self.peek()
            if nkind == "op" and nval == "(":
                if val not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {val!r}", pos,
                                          expected=FUNCTIONS)
                self.advance()
                args = [self.expr()]
                while True:
                    k2, v2, p2 = self.peek()
                    if k2 == "op" and v2 == ",":
                        self.advance()
                        args.append(self.expr())
                    else:
                        break
                self.expect_op(")")
                if len(args) != FUNCTIONS[val]:
                    raise ExprSyntaxError(
                        f"{val} takes {FUNCTIONS[val]} argument(s), got {len(args)}", pos)
                return Call(val, tuple(args))
            if self.allowed is not None and val not in self.allowed:
                raise ExprSyntaxError(f"unknown identifier {val!r}", pos,
                                      expected=self.allowed)
            return Var(val)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        raise ExprSyntaxError(f"unexpected token {val or 'end of input'!r}", pos,
                              expected={"number", "identifier", "(", "-"})


def parse(source: str, allowed_names: Iterable[str] | None = None) -> Expr:
    """Parse a formula into an expression tree.

    If allowed_names is given, bare identifiers outside that set raise an
    ExprSyntaxError listing the allowed names; otherwise any identifier
    parses as a Var and unbound names surface at eval time.
    """
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(source, allowed_names).parse()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(e: Expr) -> int:
    if isinstance(e, Bin):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _PREC["neg"]
    return 9


def to_source(e: Expr) -> str:
    """Print a tree so that parse(to_source(e)) is structurally equal to e."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        inner = to_source(e.operand)
        if _prec(e.operand) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(to_source(a) for a in e.args)})"
    lhs, rhs = to_source(e.lhs), to_source(e.rhs)
    p = _PREC[e.op]
    # left operand needs parens when looser, or equal for the right-assoc ^
    if _prec(e.lhs) < p or (e.op == "^" and _prec(e.lhs) == p):
        lhs = f"({lhs})"
    # right operand needs parens when looser, or equal for left-assoc ops
    if _prec(e.rhs) < p or (e.op in "+-*/" and _prec(e.rhs) == p):
        rhs = f"({rhs})"
    return f"{lhs} {e.op} {rhs}"


def _pow(base: float, exponent: float, node: Expr) -> float:
    if base == 0.0 and exponent < 0:
        raise ExprDomainError("zero raised to a negative power", node)
    if base < 0 and exponent != int(exponent):
        raise ExprDomainError("negative base with non-integer exponent", node)
    try:
        out = base ** exponent
    except OverflowError:
        raise ExprDomainError("overflow", node) from None
    if isinstance(out, complex):  # pragma: no cover - guarded above
        raise ExprDomainError("complex result", node)
    return out


def evaluate(e: Expr, bindings: Mapping[str, float]) -> float:
    """Evaluate a tree under IEEE-754 double semantics.

    Raises ExprDomainError (carrying the offending subtree) for log of a
    non-positive number, division by zero, sqrt of a negative number,
    fractional powers of negative numbers and overflow; raises ExprError
    for names missing from the bindings.
    """
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return float(bindings[e.name])
        except KeyError:
            raise ExprError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Neg):
        return -evaluate(e.operand, bindings)
    if isinstance(e, Call):
        args = [evaluate(a, bindings) for a in e.args]
        if e.fn == "exp":
            try:
                return math.exp(args[0])
            except OverflowError:
                raise ExprDomainError("overflow in exp", e) from None
        if e.fn == "log":
            if args[0] <= 0.0:
                raise ExprDomainError("log of a non-positive number", e)
            return math.log(args[0])
        if e.fn == "sin":
            return math.sin(args[0])
        if e.fn == "cos":
            return math.cos(args[0])
        if e.fn == "sqrt":
            if args[0] < 0.0:
                raise ExprDomainError("sqrt of a negative number", e)
            return math.sqrt(args[0])
        if e.fn == "pow":
            return _pow(args[0], args[1], e)
        raise ExprError(f"unknown function {e.fn!r}")  # pragma: no cover
    if isinstance(e, Bin):
        a = evaluate(e.lhs, bindings)
        b = evaluate(e.rhs, bindings)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0.0:
                raise ExprDomainError("division by zero", e)
            return a / b
        return _pow(a, b, e)
    raise ExprError(f"not an expression node: {e!r}")  # pragma: no cover


def free_variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Neg):
        return free_variables(e.operand)
    if isinstance(e, Bin):
        return free_variables(e.lhs) | free_variables(e.rhs)
    if isinstance(e, Call):
        out: set[str] = set()
        for a in e.args:
            out |= free_variables(a)
        return out
    return set()


def partial(e: Expr, var: str, point: Mapping[str, float],
            h: float | None = None) -> float:
    """Numeric partial derivative d e / d var at the given bindings.

    Fourth-order central difference; default step h = 1e-5 * max(1, |x0|)
    where x0 is the value bound to var.  A variable absent from the tree
    differentiates to exactly 0.0 (the stencil cancels identically).
    """
    x0 = float(point[var])

    def fn(v: float) -> float:
        bound = dict(point)
        bound[var] = v
        return evaluate(e, bound)

    return numdiff.d1(fn, x0, h)
