"""Small scalar expression language for chart metrics and fields.

Grammar (whitespace is insignificant)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?
    primary := number | ident | ident '(' expr ')' | '(' expr ')'

``^`` is right-associative and binds tighter than unary minus, so
``-x1^2`` is ``-(x1^2)`` and ``2^3^2`` is ``2^(3^2)``.  Identifiers are the
coordinates ``x1, x2, ...`` (1-based), the constants ``pi`` and ``e``, and
the functions in :data:`FUNCTIONS`.

Evaluation is vectorised: a point may be an array of shape ``(..., n)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "Expr", "Num", "Const", "Coord", "Neg", "BinOp", "Call",
    "ExprError", "ExprSyntaxError", "EvaluationError",
    "parse", "evaluate", "to_string", "coordinates", "max_coordinate",
    "FUNCTIONS", "CONSTANTS",
]


class ExprError(Exception):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class EvaluationError(ExprError, ArithmeticError):
    pass


CONSTANTS = {"pi": math.pi, "e": math.e}


def _checked_log(x):
    if np.any(x <= 0):
        raise EvaluationError("log of a non-positive value")
    return np.log(x)


def _checked_sqrt(x):
    if np.any(x < 0):
        raise EvaluationError("sqrt of a negative value")
    return np.sqrt(x)


FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": _checked_log,
    "sqrt": _checked_sqrt,
    "tanh": np.tanh,
}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Coord:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Expr"


Expr = Union[Num, Const, Coord, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)
_COORD = re.compile(r"x([1-9][0-9]*)\Z")


def _tokenize(text: str):
    data = text.encode("utf-8")
    src = data.decode("ascii", errors="replace")
    pos = 0
    tokens = []
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            start = pos + len(src[pos:]) - len(src[pos:].lstrip())
            shown = data[start:].decode("utf-8", errors="replace")[:1]
            raise ExprSyntaxError(f"unexpected character {shown!r}", start)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value or kind != "op":
            raise ExprSyntaxError(f"expected {value!r}, found {text or 'end of input'!r}", pos)

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def primary(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            if self.peek()[:2] == ("op", "("):
                if text not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {text!r}", pos)
                self.take()
                arg = self.expr()
                if self.peek()[:2] == ("op", ","):
                    raise ExprSyntaxError(f"{text} takes exactly one argument", self.peek()[2])
                self.expect(")")
                return Call(text, arg)
            if text in FUNCTIONS:
                raise ExprSyntaxError(f"function {text!r} needs an argument", pos)
            if text in CONSTANTS:
                return Const(text)
            m = _COORD.match(text)
            if m:
                return Coord(int(m.group(1)))
            raise ExprSyntaxError(f"unknown identifier {text!r}", pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"unexpected {text or 'end of input'!r}", pos)


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree."""
    return _Parser(text).parse()


def coordinates(expr: Expr) -> frozenset:
    """1-based coordinate indices referenced by ``expr``."""
    if isinstance(expr, Coord):
        return frozenset([expr.index])
    if isinstance(expr, Neg):
        return coordinates(expr.operand)
    if isinstance(expr, BinOp):
        return coordinates(expr.left) | coordinates(expr.right)
    if isinstance(expr, Call):
        return coordinates(expr.arg)
    return frozenset()


def max_coordinate(expr: Expr) -> int:
    return max(coordinates(expr), default=0)


def evaluate(expr: Expr, point):
    """Evaluate at ``point`` (shape ``(n,)`` or ``(..., n)``).

    Division by zero and out-of-domain ``log``/``sqrt`` raise
    :class:`EvaluationError` instead of producing inf/NaN.
    """
    point = np.asarray(point, dtype=float)
    need = max_coordinate(expr)
    if need > (point.shape[-1] if point.ndim else 0):
        raise EvaluationError(f"expression uses x{need} but point has dimension "
                              f"{point.shape[-1] if point.ndim else 0}")
    value = _eval(expr, point)
    if np.ndim(value) == 0 and point.ndim > 1:
        value = np.full(point.shape[:-1], float(value))
    if np.ndim(value) == 0:
        return float(value)
    return value


def _eval(node, x):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Coord):
        return x[..., node.index - 1]
    if isinstance(node, Neg):
        return -_eval(node.operand, x)
    if isinstance(node, Call):
        with np.errstate(over="raise", invalid="raise"):
            try:
                return FUNCTIONS[node.name](_eval(node.arg, x))
            except FloatingPointError as exc:
                raise EvaluationError(f"{node.name}: {exc}") from None
    a = _eval(node.left, x)
    b = _eval(node.right, x)
    with np.errstate(all="raise"):
        try:
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            if node.op == "/":
                if np.any(np.asarray(b) == 0):
                    raise EvaluationError("division by zero")
                return a / b
            return _power(a, b)
        except FloatingPointError as exc:
            raise EvaluationError(str(exc)) from None


def _power(a, b):
    a_arr, b_arr = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    integral = np.all(b_arr == np.round(b_arr))
    if not integral and np.any(a_arr < 0):
        raise EvaluationError("fractional power of a negative value")
    if np.any((a_arr == 0) & (b_arr < 0)):
        raise EvaluationError("zero raised to a negative power")
    return np.power(a_arr, b_arr) if (a_arr.ndim or b_arr.ndim) else float(a_arr ** b_arr)





def to_string(expr: Expr) -> str:
    """Render ``expr`` so that ``parse(to_string(e)) == e``."""
    if isinstance(expr, Num):
        return repr(expr.value)
    if isinstance(expr, Const):
        return expr.name
    if isinstance(expr, Coord):
        return f"x{expr.index}"
    if isinstance(expr, Call):
        return f"{expr.name}({to_string(expr.arg)})"
    if isinstance(expr, Neg):
        inner = to_string(expr.operand)
        if isinstance(expr.operand, BinOp) and expr.operand.op != "^":
            inner = f"({inner})"
        return f"-{inner}"
    # binary: parenthesise any compound operand; keeps the round-trip trivially exact
    left, right = to_string(expr.left), to_string(expr.right)
    if isinstance(expr.left, (BinOp, Neg)):
        left = f"({left})"
    if isinstance(expr.right, (BinOp, Neg)):
        right = f"({right})"
    return f"{left} {expr.op} {right}"
