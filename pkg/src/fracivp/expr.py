"""Right-hand-side expressions ``f(t, y1, ..., yk)``.

Grammar (EBNF)::

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { ("*" | "/") , unary } ;
    unary   = ("-" | "+") , unary | power ;
    power   = primary , [ "^" , unary ] ;        (* right associative *)
    primary = number | "t" | "y" , digits
            | func , "(" , expr , { "," , expr } , ")"
            | "(" , expr , ")" ;
    func    = "gamma" | "abs" | "exp" | "log" | "sin" | "cos" | "sqrt" | "pow" ;
    number  = digits , [ "." , [ digits ] ] , [ ("e" | "E") , [ "+" | "-" ] , digits ]
            | "." , digits , [ exponent ] ;

``-a^b`` parses as ``-(a^b)``; ``a^-b`` is allowed. Evaluation works on
floats or numpy arrays and raises :class:`DomainError` instead of
producing NaN or infinities.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import core
from .errors import ArityError, DomainError, ParseError, UnknownIdentifierError

__all__ = [
    "Num", "Var", "Neg", "BinOp", "Call", "Expression",
    "parse", "evaluate", "to_source",
]

FUNCTIONS = {
    "gamma": 1, "abs": 1, "exp": 1, "log": 1,
    "sin": 1, "cos": 1, "sqrt": 1, "pow": 2,
}


@dataclass(frozen=True)
class Num:
    value: float
    pos: int = field(default=0, compare=False)
    end: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    index: int          # 0 is t, j >= 1 is y_j
    pos: int = field(default=0, compare=False)
    end: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: "Node"
    pos: int = field(default=0, compare=False)
    end: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"
    pos: int = field(default=0, compare=False)
    end: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple
    pos: int = field(default=0, compare=False)
    end: int = field(default=0, compare=False)


Node = Union[Num, Var, Neg, BinOp, Call]


@dataclass(frozen=True)
class Expression:
    root: Node
    arity: int
    source: str = field(default="", compare=False)

    def __call__(self, t, *ys):
        return evaluate(self, t, ys)

    def __str__(self):
        return to_source(self)

    def snippet(self, node) -> str:
        return self.source[node.pos:node.end] if self.source else to_source(node)


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(src: str):
    pos = 0
    tokens = []
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", _byte(src, pos))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), m.start(), m.end()))
        pos = m.end()
    tokens.append(("eof", "", len(src), len(src)))
    return tokens


def _byte(src: str, pos: int) -> int:
    return len(src[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, src: str, arity: int):
        self.src = src
        self.arity = arity
        self.tokens = _tokenize(src)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def error(self, message, pos=None, cls=ParseError):
        if pos is None:
            pos = self.tok[2]
        raise cls(message, _byte(self.src, pos))

    def accept(self, text):
        if self.tok[0] == "op" and self.tok[1] == text:
            self.i += 1
            return True
        return False

    def expect(self, text):
        if not self.accept(text):
            found = self.tok[1] or "end of input"
            self.error(f"expected {text!r}, found {found!r}")

    def parse(self) -> Node:
        node = self.expr()
        if self.tok[0] != "eof":
            self.error(f"unexpected {self.tok[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.tok[1]
            self.i += 1
            rhs = self.term()
            node = BinOp(op, node, rhs, node.pos, rhs.end)
        return node

    def term(self):
        node = self.unary()
        while self.tok[0] == "op" and self.tok[1] in "*/":
            op = self.tok[1]
            self.i += 1
            rhs = self.unary()
            node = BinOp(op, node, rhs, node.pos, rhs.end)
        return node

    def unary(self):
        start = self.tok[2]
        if self.accept("-"):
            operand = self.unary()
            return Neg(operand, start, operand.end)
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self):
        base = self.primary()
        if self.accept("^"):
            exponent = self.unary()
            return BinOp("^", base, exponent, base.pos, exponent.end)
        return base

    def primary(self):
        kind, text, start, end = self.tok
        if kind == "num":
            self.i += 1
            value = float(text)
            if not math.isfinite(value):
                self.error(f"numeric literal {text!r} out of range", start)
            return Num(value, start, end)
        if kind == "name":
            self.i += 1
            if text == "t":
                return Var(0, start, end)
            m = re.fullmatch(r"y([1-9]\d*)", text)
            if m:
                index = int(m.group(1))
                if index > self.arity:
                    self.error(
                        f"{text} exceeds arity {self.arity}", start, ArityError
                    )
                return Var(index, start, end)
            if text in FUNCTIONS:
                self.expect("(")
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                close = self.tok[3]
                self.expect(")")
                if len(args) != FUNCTIONS[text]:
                    self.error(
                        f"{text} takes {FUNCTIONS[text]} argument(s), got {len(args)}",
                        start,
                    )
                return Call(text, tuple(args), start, close)
            self.error(f"unknown identifier {text!r}", start, UnknownIdentifierError)
        if self.accept("("):
            node = self.expr()
            close = self.tok[3]
            self.expect(")")
            # widen the span so error snippets include the parentheses
            return _respan(node, start, close)
        found = text or "end of input"
        self.error(f"unexpected {found!r}", start)


def _respan(node, pos, end):
    return type(node)(**{**node.__dict__, "pos": pos, "end": end})


def parse(source: str, arity: int) -> Expression:
    """Parse ``source`` into an expression over ``t, y1..y{arity}``."""
    if arity < 0:
        raise ValueError("arity must be non-negative")
    return Expression(_Parser(source, arity).parse(), arity, source)


def to_source(obj) -> str:
    """Canonical, fully parenthesized text that parses back to the same tree."""
    node = obj.root if isinstance(obj, Expression) else obj
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return "t" if node.index == 0 else f"y{node.index}"
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


def _fail(expr, node, message, point=None):
    raise DomainError(message, _byte(expr.source, node.pos) if expr.source else node.pos,
                      expr.snippet(node), point)


def _first_bad(mask, *arrays):
    idx = np.flatnonzero(np.broadcast_to(mask, np.broadcast(*arrays, mask).shape))[0]
    return tuple(float(np.broadcast_to(a, mask.shape).ravel()[idx]) for a in arrays)


def _check(expr, node, result, *inputs):
    result = np.asarray(result, dtype=float)
    finite = np.isfinite(result)
    if not np.all(finite):
        _fail(expr, node, "non-finite result", _first_bad(~finite, *inputs) if inputs else None)
    return result


def _power(expr, node, base, exponent):
    base = np.asarray(base, dtype=float)
    exponent = np.asarray(exponent, dtype=float)
    bad = (base < 0) & (exponent != np.round(exponent))
    if np.any(bad):
        _fail(expr, node, "fractional power of negative base",
              _first_bad(bad, base, exponent))
    zero_neg = (base == 0) & (exponent < 0)
    if np.any(zero_neg):
        _fail(expr, node, "negative power of zero", _first_bad(zero_neg, base, exponent))
    with np.errstate(over="ignore"):
        return _check(expr, node, np.power(base, exponent), base, exponent)


def _eval(expr, node, t, ys):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return t if node.index == 0 else ys[node.index - 1]
    if isinstance(node, Neg):
        return -_eval(expr, node.operand, t, ys)
    if isinstance(node, BinOp):
        a = _eval(expr, node.left, t, ys)
        b = _eval(expr, node.right, t, ys)
        if node.op == "+":
            return _check(expr, node, np.add(a, b))
        if node.op == "-":
            return _check(expr, node, np.subtract(a, b))
        if node.op == "*":
            return _check(expr, node, np.multiply(a, b))
        if node.op == "/":
            b_arr = np.asarray(b, dtype=float)
            if np.any(b_arr == 0):
                _fail(expr, node, "division by zero")
            with np.errstate(over="ignore"):
                return _check(expr, node, np.divide(a, b))
        return _power(expr, node, a, b)
    if isinstance(node, Call):
        args = [_eval(expr, a, t, ys) for a in node.args]
        x = np.asarray(args[0], dtype=float)
        name = node.name
        if name == "pow":
            return _power(expr, node, x, args[1])
        if name == "gamma":
            if np.any(x <= 0):
                _fail(expr, node, "gamma of non-positive argument",
                      _first_bad(x <= 0, x))
            return _check(expr, node, core.gamma(x), x)
        if name == "log":
            if np.any(x <= 0):
                _fail(expr, node, "log of non-positive argument", _first_bad(x <= 0, x))
            return np.log(x)
        if name == "sqrt":
            if np.any(x < 0):
                _fail(expr, node, "sqrt of negative argument", _first_bad(x < 0, x))
            return np.sqrt(x)
        if name == "exp":
            with np.errstate(over="ignore"):
                return _check(expr, node, np.exp(x), x)
        if name == "abs":
            return np.abs(x)
        if name == "sin":
            return np.sin(x)
        if name == "cos":
            return np.cos(x)
    raise TypeError(f"not an expression node: {node!r}")


_SCALAR_FUNCS = {
    "abs": abs, "exp": math.exp, "sin": math.sin, "cos": math.cos,
}


def _eval_scalar(expr, node, t, ys):
    # float-only twin of _eval; avoids numpy overhead in per-node solvers
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return t if node.index == 0 else ys[node.index - 1]
    if isinstance(node, Neg):
        return -_eval_scalar(expr, node.operand, t, ys)
    if isinstance(node, BinOp):
        a = _eval_scalar(expr, node.left, t, ys)
        b = _eval_scalar(expr, node.right, t, ys)
        try:
            if node.op == "+":
                out = a + b
            elif node.op == "-":
                out = a - b
            elif node.op == "*":
                out = a * b
            elif node.op == "/":
                if b == 0:
                    _fail(expr, node, "division by zero")
                out = a / b
            else:
                out = _scalar_power(expr, node, a, b)
        except OverflowError:
            out = math.inf
        if not math.isfinite(out):
            _fail(expr, node, "non-finite result", (a, b))
        return out
    args = [_eval_scalar(expr, a, t, ys) for a in node.args]
    x = args[0]
    name = node.name
    if name == "pow":
        out = _scalar_power(expr, node, x, args[1])
    elif name == "gamma":
        if x <= 0:
            _fail(expr, node, "gamma of non-positive argument", (x,))
        out = core.gamma(x)
    elif name == "log":
        if x <= 0:
            _fail(expr, node, "log of non-positive argument", (x,))
        out = math.log(x)
    elif name == "sqrt":
        if x < 0:
            _fail(expr, node, "sqrt of negative argument", (x,))
        out = math.sqrt(x)
    else:
        try:
            out = _SCALAR_FUNCS[name](x)
        except OverflowError:
            out = math.inf
    if not math.isfinite(out):
        _fail(expr, node, "non-finite result", (x,))
    return out


def _scalar_power(expr, node, a, b):
    if a < 0 and b != round(b):
        _fail(expr, node, "fractional power of negative base", (a, b))
    if a == 0 and b < 0:
        _fail(expr, node, "negative power of zero", (a, b))
    return math.pow(a, b)


def evaluate(expr: Expression, t, ys: Sequence = ()):
    """Evaluate at ``t`` with ``ys = (y1, ..., yk)``; scalars or broadcastable arrays."""
    if len(ys) != expr.arity:
        raise ValueError(f"expected {expr.arity} y-arguments, got {len(ys)}")
    scalar = np.ndim(t) == 0 and all(np.ndim(y) == 0 for y in ys)
    if scalar:
        return float(_eval_scalar(expr, expr.root, float(t), [float(y) for y in ys]))
    t = np.asarray(t, dtype=float)
    ys = [np.asarray(y, dtype=float) for y in ys]
    out = _eval(expr, expr.root, t, ys)
    shape = np.broadcast_shapes(t.shape, *(y.shape for y in ys))
    return np.array(np.broadcast_to(np.asarray(out, dtype=float), shape))
