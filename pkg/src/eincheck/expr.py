"""Parser and jet evaluator for metric-component expressions.

The input language is tiny: reals, the four chart coordinates, named
parameters, ``+ - * / ^`` with ``^`` right-associative and binding tighter
than unary minus, and the functions exp, log, sin, cos, tan, sinh, cosh,
tanh, sqrt, pow, neg.  Expressions are immutable ASTs; the only evaluation
path is through jets, so every derivative that the geometry needs is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import (
    ArityError,
    EvalDomainError,
    JetError,
    ParseError,
    UnknownFunctionError,
    UnknownSymbolError,
)
from .jets import Jet4, compose_univariate, ipow

FUNCTIONS = {
    "exp": 1,
    "log": 1,
    "sin": 1,
    "cos": 1,
    "tan": 1,
    "sinh": 1,
    "cosh": 1,
    "tanh": 1,
    "sqrt": 1,
    "pow": 2,
    "neg": 1,
}

_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW = 1, 2, 3, 4
_BINARY_PREC = {"+": _PREC_ADD, "-": _PREC_ADD, "*": _PREC_MUL, "/": _PREC_MUL, "^": _PREC_POW}


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Coord:
    index: int
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


@dataclass(frozen=True)
class ScalarExpr:
    """A parsed expression bound to a 4-coordinate chart."""

    root: object
    chart: tuple
    params: frozenset

    def source(self):
        return to_source(self.root)

    def __str__(self):
        return self.source()


def _is_name_start(c):
    return c.isalpha() or c == "_"


def _is_name_char(c):
    return c.isalnum() or c == "_"


def _tokenize(text):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            lexeme = text[i:j]
            try:
                value = float(lexeme)
            except ValueError:
                raise ParseError(f"malformed number '{lexeme}'", position=i) from None
            tokens.append(("number", value, i))
            i = j
            continue
        if _is_name_start(c):
            j = i
            while j < n and _is_name_char(text[j]):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        if c in "+-*/^(),":
            tokens.append((c, c, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {c!r}", position=i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens, chart, params):
        self.tokens = tokens
        self.pos = 0
        self.chart = {name: i for i, name in enumerate(chart)}
        self.params = set(params)

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind, expected):
        tok = self.advance()
        if tok[0] != kind:
            raise ParseError(
                f"unexpected token {tok[1]!r}" if tok[0] != "end" else "unexpected end of input",
                position=tok[2],
                expected=expected,
            )
        return tok

    def expression(self, min_prec=0):
        left = self.prefix()
        while True:
            kind, _, _ = self.peek()
            prec = _BINARY_PREC.get(kind)
            if prec is None or prec < min_prec:
                return left
            self.advance()
            # right-associative ^ re-enters at its own level, the rest above it
            right = self.expression(prec if kind == "^" else prec + 1)
            left = Binary(kind, left, right)

    def prefix(self):
        kind, text, pos = self.advance()
        if kind == "number":
            return Const(text)
        if kind == "-":
            return Unary("neg", self.expression(_PREC_UNARY))
        if kind == "(":
            inner = self.expression()
            self.expect(")", {"')'"})
            return inner
        if kind == "name":
            if self.peek()[0] == "(":
                return self.call(text, pos)
            if text in self.chart:
                return Coord(self.chart[text], text)
            if text in self.params:
                return Param(text)
            raise UnknownSymbolError(f"unknown symbol '{text}'", position=pos)
        raise ParseError(
            f"unexpected token {text!r}" if kind != "end" else "unexpected end of input",
            position=pos,
            expected={"number", "name", "'('", "'-'"},
        )

    def call(self, func, pos):
        if func not in FUNCTIONS:
            raise UnknownFunctionError(f"unknown function '{func}'", position=pos)
        self.expect("(", {"'('"})
        args = [self.expression()]
        while self.peek()[0] == ",":
            self.advance()
            args.append(self.expression())
        self.expect(")", {"')'", "','"})
        if len(args) != FUNCTIONS[func]:
            raise ArityError(
                f"function '{func}' takes {FUNCTIONS[func]} argument(s), got {len(args)}",
                position=pos,
            )
        return Call(func, tuple(args))


def parse(source, chart, params=()):
    """Parse an expression over a 4-name chart and a set of parameter names.

    Free symbols must come from chart or params; everything else is an error
    carrying the character offset.
    """
    chart = tuple(chart)
    if len(chart) != 4 or len(set(chart)) != 4:
        raise ParseError("chart must declare 4 distinct coordinate names")
    parser = _Parser(_tokenize(source), chart, params)
    root = parser.expression()
    end = parser.peek()
    if end[0] != "end":
        raise ParseError(f"trailing input {end[1]!r}", position=end[2])
    return ScalarExpr(root=root, chart=chart, params=frozenset(params))


def _fmt_number(value):
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def to_source(node, parent_prec=0):
    """Minimal-parenthesis rendering that re-parses to an equal AST."""
    if isinstance(node, Const):
        return _fmt_number(node.value)
    if isinstance(node, Coord):
        return node.name
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Unary):
        text = "-" + to_source(node.operand, _PREC_UNARY + 1)
        return f"({text})" if parent_prec > _PREC_UNARY else text
    if isinstance(node, Binary):
        prec = _BINARY_PREC[node.op]
        if node.op == "^":
            left = to_source(node.left, prec + 1)
            right = to_source(node.right, prec)
        else:
            left = to_source(node.left, prec)
            right = to_source(node.right, prec + 1)
        text = f"{left} {node.op} {right}" if node.op in "+-" else f"{left}{node.op}{right}"
        return f"({text})" if parent_prec > prec else text
    if isinstance(node, Call):
        args = ", ".join(to_source(a) for a in node.args)
        return f"{node.func}({args})"
    raise TypeError(f"not an AST node: {node!r}")


# univariate Taylor series of the elementary functions, developed at c


def _series_exp(c, d):
    e = math.exp(c)
    return [e / math.factorial(k) for k in range(d + 1)]


def _series_log(c, d):
    out = [math.log(c)]
    for k in range(1, d + 1):
        out.append((-1.0) ** (k + 1) / (k * c**k))
    return out


def _series_sqrt(c, d):
    out = [math.sqrt(c)]
    coeff = 0.5
    for k in range(1, d + 1):
        out.append(coeff * c ** (0.5 - k))
        coeff *= (0.5 - k) / (k + 1)
    return out


def _series_trig(c, d, f0, f1):
    cycle = [f0(c), f1(c), -f0(c), -f1(c)]
    return [cycle[k % 4] / math.factorial(k) for k in range(d + 1)]


def _series_hyp(c, d, f0, f1):
    cycle = [f0(c), f1(c)]
    return [cycle[k % 2] / math.factorial(k) for k in range(d + 1)]


def _apply_function(func, args, node):
    inner = args[0]
    c = inner.value
    d = inner.degree
    if func == "neg":
        return -inner
    if func == "exp":
        return compose_univariate(_series_exp(c, d), inner)
    if func == "log":
        if c <= 0.0:
            raise EvalDomainError("log of a non-positive value", to_source(node))
        return compose_univariate(_series_log(c, d), inner)
    if func == "sqrt":
        if c <= 0.0:
            raise EvalDomainError("sqrt of a non-positive value", to_source(node))
        return compose_univariate(_series_sqrt(c, d), inner)
    if func == "sin":
        return compose_univariate(_series_trig(c, d, math.sin, math.cos), inner)
    if func == "cos":
        return compose_univariate(_series_trig(c, d, math.cos, lambda x: -math.sin(x)), inner)
    if func == "tan":
        cos_jet = compose_univariate(_series_trig(c, d, math.cos, lambda x: -math.sin(x)), inner)
        if cos_jet.value == 0.0:
            raise EvalDomainError("tan at a pole", to_source(node))
        sin_jet = compose_univariate(_series_trig(c, d, math.sin, math.cos), inner)
        return sin_jet / cos_jet
    if func == "sinh":
        return compose_univariate(_series_hyp(c, d, math.sinh, math.cosh), inner)
    if func == "cosh":
        return compose_univariate(_series_hyp(c, d, math.cosh, math.sinh), inner)
    if func == "tanh":
        sinh_jet = compose_univariate(_series_hyp(c, d, math.sinh, math.cosh), inner)
        cosh_jet = compose_univariate(_series_hyp(c, d, math.cosh, math.sinh), inner)
        return sinh_jet / cosh_jet
    raise UnknownFunctionError(f"unknown function '{func}'")


def _power(base_jet, exp_node, exp_jet, node):
    # integer exponents by repeated multiplication (exact, domain-safe for
    # negative bases); everything else lowers to exp(e*log(b))
    if isinstance(exp_node, Const) and float(exp_node.value).is_integer():
        n = int(exp_node.value)
        if n == 0:
            return Jet4.constant(1.0, base_jet.base, base_jet.degree)
        out = ipow(base_jet, abs(n))
        if n < 0:
            if out.value == 0.0:
                raise EvalDomainError("negative power of a zero value", to_source(node))
            out = 1.0 / out
        return out
    if isinstance(exp_node, Unary) and exp_node.op == "neg":
        inner = exp_node.operand
        if isinstance(inner, Const) and float(inner.value).is_integer():
            return _power(base_jet, Const(-inner.value), None, node)
    if base_jet.value <= 0.0:
        raise EvalDomainError("non-integer power of a non-positive base", to_source(node))
    if exp_jet is None:
        exp_jet = Jet4.constant(float(exp_node.value), base_jet.base, base_jet.degree)
    log_b = _apply_function("log", [base_jet], node)
    return _apply_function("exp", [exp_jet * log_b], node)


def eval_on_jets(expr, coords, bindings=None):
    """Evaluate a parsed expression on four coordinate seed jets.

    Every seed must share base point and degree; the result carries the exact
    Taylor coefficients of the expression at that point within the budget.
    """
    bindings = dict(bindings or {})
    coords = tuple(coords)
    missing = expr.params - bindings.keys()
    if missing:
        raise EvalDomainError(f"unbound parameters: {', '.join(sorted(missing))}")
    base = coords[0].base
    degree = coords[0].degree
    for seed in coords[1:]:
        if seed.base != base or seed.degree != degree:
            raise JetError("coordinate seeds must share base point and degree")

    def walk(node):
        if isinstance(node, Const):
            return Jet4.constant(node.value, base, degree)
        if isinstance(node, Coord):
            return coords[node.index]
        if isinstance(node, Param):
            return Jet4.constant(float(bindings[node.name]), base, degree)
        if isinstance(node, Unary):
            return -walk(node.operand)
        if isinstance(node, Binary):
            if node.op == "^":
                right = None if isinstance(node.right, Const) else walk(node.right)
                return _power(walk(node.left), node.right, right, node)
            left, right = walk(node.left), walk(node.right)
            if node.op == "+":
                return left + right
            if node.op == "-":
                return left - right
            if node.op == "*":
                return left * right
            if right.value == 0.0:
                raise EvalDomainError("division by a value that vanishes", to_source(node))
            return left / right
        if isinstance(node, Call):
            if node.func == "pow":
                right = None if isinstance(node.args[1], Const) else walk(node.args[1])
                return _power(walk(node.args[0]), node.args[1], right, node)
            return _apply_function(node.func, [walk(a) for a in node.args], node)
        raise TypeError(f"not an AST node: {node!r}")

    return walk(expr.root)
