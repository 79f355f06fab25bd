"""Recursive-descent parser and evaluator for periodic field expressions.

Grammar (LL(1), standard precedence: power > unary minus > mul/div > add/sub):

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := '-' factor | power
    power   := atom (('^' | '**') integer)?
    atom    := number | name | name '(' expr ')' | '(' expr ')' | vector
    vector  := '[' expr (',' expr)* ']'

Names are the variables x, y, z, the constants pi and golden, and the
functions sin, cos, exp.  Every expression must evaluate 1-periodically
on the torus, which is enforced structurally: a variable may only occur
inside sin/cos whose argument is a sum of (2π · integer · variable)
terms, constants, and further periodic subexpressions.  The rule is
stricter than mathematically necessary but guarantees that sampled
fields are band-limited trigonometric data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CONSTANTS",
    "ExpressionError",
    "PeriodicityError",
    "Call",
    "BinOp",
    "Neg",
    "Num",
    "Const",
    "Pow",
    "Var",
    "Vector",
    "evaluate",
    "parse_expression",
    "parse_matrix",
    "parse_vector",
    "pretty",
    "validate_periodic",
]

CONSTANTS = {"pi": math.pi, "golden": (math.sqrt(5.0) - 1.0) / 2.0}
VARIABLES = ("x", "y", "z")
FUNCTIONS = ("sin", "cos", "exp")


class ExpressionError(ValueError):
    """Syntax error with a column position."""

    def __init__(self, message, column):
        super().__init__(f"{message} (column {column})")
        self.column = column


class PeriodicityError(ValueError):
    """The expression is not structurally 1-periodic."""


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    name: str

    @property
    def axis(self):
        return VARIABLES.index(self.name)


@dataclass(frozen=True)
class BinOp:
    op: str
    lhs: object
    rhs: object


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


@dataclass(frozen=True)
class Vector:
    items: tuple


class _Tokenizer:
    def __init__(self, text):
        self.text = text
        self.pos = 0
        self.tokens = []
        self._scan()
        self.index = 0

    def _scan(self):
        text = self.text
        i = 0
        while i < len(text):
            ch = text[i]
            if ch.isspace():
                i += 1
                continue
            if ch.isdigit() or (ch == "." and i + 1 < len(text) and text[i + 1].isdigit()):
                j = i
                while j < len(text) and (text[j].isdigit() or text[j] in ".eE"
                                         or (text[j] in "+-" and text[j - 1] in "eE")):
                    j += 1
                try:
                    value = float(text[i:j])
                except ValueError:
                    raise ExpressionError(f"bad number {text[i:j]!r}", i + 1)
                self.tokens.append(("num", value, i))
                i = j
                continue
            if ch.isalpha() or ch == "_":
                j = i
                while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                self.tokens.append(("name", text[i:j], i))
                i = j
                continue
            if text.startswith("**", i):
                self.tokens.append(("op", "**", i))
                i += 2
                continue
            if ch in "+-*/^(),[]":
                self.tokens.append(("op", ch, i))
                i += 1
                continue
            raise ExpressionError(f"unexpected character {ch!r}", i + 1)
        self.tokens.append(("end", None, len(text)))

    def peek(self):
        return self.tokens[self.index]

    def next(self):
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def expect_op(self, op):
        kind, value, pos = self.next()
        if kind != "op" or value != op:
            raise ExpressionError(f"expected {op!r}, found {value!r}", pos + 1)


class _Parser:
    def __init__(self, text):
        self.tok = _Tokenizer(text)

    def parse_scalar(self):
        node = self._expr()
        self._expect_end()
        if isinstance(node, Vector):
            raise ExpressionError("expected a scalar expression, found a vector", 1)
        return node

    def parse_vector(self):
        node = self._expr()
        self._expect_end()
        if not isinstance(node, Vector):
            raise ExpressionError("expected a bracketed component list", 1)
        if any(isinstance(i, Vector) for i in node.items):
            raise ExpressionError("expected a vector, found nested brackets", 1)
        return list(node.items)

    def parse_matrix(self):
        node = self._expr()
        self._expect_end()
        if not isinstance(node, Vector) or not all(isinstance(i, Vector) for i in node.items):
            raise ExpressionError("expected a bracketed list of bracketed rows", 1)
        rows = [list(r.items) for r in node.items]
        if any(len(r) != len(rows) for r in rows):
            raise ExpressionError("matrix rows must be square", 1)
        return rows

    def _expect_end(self):
        kind, value, pos = self.tok.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected trailing {value!r}", pos + 1)

    def _expr(self):
        node = self._term()
        while True:
            kind, value, _ = self.tok.peek()
            if kind == "op" and value in "+-":
                self.tok.next()
                node = BinOp(value, node, self._term())
            else:
                return node

    def _term(self):
        node = self._factor()
        while True:
            kind, value, _ = self.tok.peek()
            if kind == "op" and value in "*/":
                self.tok.next()
                node = BinOp(value, node, self._factor())
            else:
                return node

    def _factor(self):
        kind, value, _ = self.tok.peek()
        if kind == "op" and value == "-":
            self.tok.next()
            return Neg(self._factor())
        if kind == "op" and value == "+":
            self.tok.next()
            return self._factor()
        return self._power()

    def _power(self):
        node = self._atom()
        kind, value, pos = self.tok.peek()
        if kind == "op" and value in ("^", "**"):
            self.tok.next()
            exp = self._exponent()
            return Pow(node, exp)
        return node

    def _exponent(self):
        kind, value, pos = self.tok.next()
        sign = 1
        if kind == "op" and value == "-":
            sign = -1
            kind, value, pos = self.tok.next()
        if kind != "num" or value != int(value):
            raise ExpressionError("exponent must be an integer literal", pos + 1)
        return sign * int(value)

    def _atom(self):
        kind, value, pos = self.tok.next()
        if kind == "num":
            return Num(value)
        if kind == "name":
            if value in FUNCTIONS:
                self.tok.expect_op("(")
                arg = self._expr()
                self.tok.expect_op(")")
                return Call(value, arg)
            if value in VARIABLES:
                return Var(value)
            if value in CONSTANTS:
                return Const(value)
            raise ExpressionError(f"unknown name {value!r}", pos + 1)
        if kind == "op" and value == "(":
            node = self._expr()
            self.tok.expect_op(")")
            return node
        if kind == "op" and value == "[":
            items = [self._expr()]
            while True:
                k, v, p = self.tok.next()
                if k == "op" and v == ",":
                    items.append(self._expr())
                elif k == "op" and v == "]":
                    return Vector(tuple(items))
                else:
                    raise ExpressionError(f"expected ',' or ']', found {v!r}", p + 1)
        raise ExpressionError(f"unexpected token {value!r}", pos + 1)


def parse_expression(text, dimension=None, periodic=True):
    """Parse a scalar expression; validates periodicity unless disabled."""
    node = _Parser(text).parse_scalar()
    if dimension is not None:
        _check_dimension(node, dimension)
    if periodic:
        validate_periodic(node)
    return node


def parse_vector(text, dimension=None, periodic=True):
    items = _Parser(text).parse_vector()
    for node in items:
        if dimension is not None:
            _check_dimension(node, dimension)
        if periodic:
            validate_periodic(node)
    return items


def parse_matrix(text, dimension=None, periodic=True):
    rows = _Parser(text).parse_matrix()
    for row in rows:
        for node in row:
            if dimension is not None:
                _check_dimension(node, dimension)
            if periodic:
                validate_periodic(node)
    return rows


def _check_dimension(node, dimension):
    for var in _variables_in(node):
        if var.axis >= dimension:
            raise ExpressionError(
                f"variable {var.name!r} is not available in dimension {dimension}", 1
            )


def _variables_in(node):
    if isinstance(node, Var):
        yield node
    elif isinstance(node, BinOp):
        yield from _variables_in(node.lhs)
        yield from _variables_in(node.rhs)
    elif isinstance(node, (Neg,)):
        yield from _variables_in(node.operand)
    elif isinstance(node, Pow):
        yield from _variables_in(node.base)
    elif isinstance(node, Call):
        yield from _variables_in(node.arg)
    elif isinstance(node, Vector):
        for item in node.items:
            yield from _variables_in(item)


def _is_variable_free(node):
    return next(_variables_in(node), None) is None


def _constant_value(node):
    return float(evaluate(node, (0.0, 0.0, 0.0)))


def validate_periodic(node):
    """Raise PeriodicityError unless variables only occur via valid sin/cos."""
    if isinstance(node, (Num, Const)):
        return
    if isinstance(node, Var):
        raise PeriodicityError(
            f"non-periodic use of variable {node.name!r} (outside sin/cos): "
            f"'{pretty(node)}'"
        )
    if isinstance(node, BinOp):
        validate_periodic(node.lhs)
        validate_periodic(node.rhs)
        return
    if isinstance(node, Neg):
        validate_periodic(node.operand)
        return
    if isinstance(node, Pow):
        validate_periodic(node.base)
        return
    if isinstance(node, Vector):
        for item in node.items:
            validate_periodic(item)
        return
    if isinstance(node, Call):
        if node.func in ("sin", "cos"):
            _validate_angle(node.arg)
            return
        validate_periodic(node.arg)
        return
    raise PeriodicityError(f"unsupported node {node!r}")


def _validate_angle(arg):
    """Check a sin/cos argument: sum of 2π·integer·variable terms, constants,
    and periodic subexpressions."""
    for kind, payload in _linear_terms(arg, 1.0):
        if kind == "const":
            continue
        if kind == "opaque":
            validate_periodic(payload)
            continue
        var, coeff = payload
        cycles = coeff / (2.0 * math.pi)
        if abs(cycles - round(cycles)) > 1e-9:
            raise PeriodicityError(
                f"variable {var.name!r} enters sin/cos with frequency "
                f"{cycles:.6g} cycles; only 2*pi*integer frequencies are periodic "
                f"on the unit torus: '{pretty(arg)}'"
            )


def _linear_terms(node, multiplier):
    """Yield ('const', None), ('linear', (var, coeff)), or ('opaque', node)."""
    if _is_variable_free(node):
        yield ("const", None)
        return
    if isinstance(node, Var):
        yield ("linear", (node, multiplier))
        return
    if isinstance(node, Neg):
        yield from _linear_terms(node.operand, -multiplier)
        return
    if isinstance(node, BinOp) and node.op in "+-":
        yield from _linear_terms(node.lhs, multiplier)
        sign = 1.0 if node.op == "+" else -1.0
        yield from _linear_terms(node.rhs, sign * multiplier)
        return
    if isinstance(node, BinOp) and node.op == "*":
        if _is_variable_free(node.lhs):
            yield from _linear_terms(node.rhs, multiplier * _constant_value(node.lhs))
            return
        if _is_variable_free(node.rhs):
            yield from _linear_terms(node.lhs, multiplier * _constant_value(node.rhs))
            return
        yield ("opaque", node)
        return
    if isinstance(node, BinOp) and node.op == "/" and _is_variable_free(node.rhs):
        yield from _linear_terms(node.lhs, multiplier / _constant_value(node.rhs))
        return
    yield ("opaque", node)


# ---------------------------------------------------------------------------
# evaluation and printing
# ---------------------------------------------------------------------------


def evaluate(node, coords):
    """Evaluate an AST on coordinate arrays (x, y[, z]); broadcasts freely."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Var):
        if node.axis >= len(coords):
            raise ValueError(f"variable {node.name!r} has no coordinate")
        return coords[node.axis]
    if isinstance(node, BinOp):
        a = evaluate(node.lhs, coords)
        b = evaluate(node.rhs, coords)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return a / b
    if isinstance(node, Neg):
        return -evaluate(node.operand, coords)
    if isinstance(node, Pow):
        base = evaluate(node.base, coords)
        if node.exponent < 0:
            return 1.0 / np.power(base, -node.exponent)
        return np.power(base, node.exponent)
    if isinstance(node, Call):
        arg = evaluate(node.arg, coords)
        return getattr(np, node.func)(arg)
    if isinstance(node, Vector):
        raise ValueError("cannot evaluate a vector literal as a scalar")
    raise TypeError(f"unknown node {node!r}")


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def pretty(node):
    """Canonical text form; parse(pretty(parse(t))) is identical to parse(t)."""
    return _pretty(node, 0)


def _pretty(node, parent_prec):
    if isinstance(node, Num):
        value = node.value
        text = repr(int(value)) if value == int(value) and abs(value) < 1e15 else repr(value)
        return text
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Var):
        return node.name
    if isinstance(node, BinOp):
        prec = _PRECEDENCE[node.op]
        lhs = _pretty(node.lhs, prec)
        # right operand needs parens at equal precedence for - and /
        rhs = _pretty(node.rhs, prec + (1 if node.op in "-/" else 0))
        text = f"{lhs} {node.op} {rhs}"
        return f"({text})" if prec < parent_prec else text
    if isinstance(node, Neg):
        inner = _pretty(node.operand, 3)
        text = f"-{inner}"
        return f"({text})" if parent_prec >= 2 else text
    if isinstance(node, Pow):
        base = _pretty(node.base, 4)
        return f"{base}^{node.exponent}"
    if isinstance(node, Call):
        return f"{node.func}({_pretty(node.arg, 0)})"
    if isinstance(node, Vector):
        return "[" + ", ".join(_pretty(i, 0) for i in node.items) + "]"
    raise TypeError(f"unknown node {node!r}")
