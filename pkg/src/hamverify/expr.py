"""Expression language for phase-space functions.

Grammar (whitespace-insensitive)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ['^' unary]          # right-associative
    atom   := NUMBER | variable | function '(' expr {',' expr} ')' | '(' expr ')'

Precedence, tightest first: ``^``, unary ``-``, ``* /``, ``+ -``.

Variables are ``t``, ``q1..qm``, ``p1..pm`` and (on the extended phase space
only) ``p0``.  Functions: sin, cos, tan, exp, log, sqrt, atan2, abs.

Power expressions whose exponent is a literal integer are stored as
:class:`IntPow` with the exponent inline; this keeps ``p1^2`` meaningful for
negative ``p1``, where a real-exponent power would be a domain error.

Trees are immutable after parsing, and ``parse(to_source(tree))`` returns a
structurally identical tree for every parser-produced ``tree``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np

from . import duals
from .duals import Dual2
from .errors import (ArityError, EvalError, MissingVariable, ParseError,
                     VariableIndexError)

__all__ = [
    "Expression", "Num", "Var", "Neg", "BinOp", "IntPow", "Pow", "Call",
    "parse", "evaluate", "to_source", "node_count", "free_variables",
    "ScalarField", "FunctionField", "Gradient", "Hessian", "FUNCTIONS",
]

FUNCTIONS = {"sin": 1, "cos": 1, "tan": 1, "exp": 1, "log": 1, "sqrt": 1,
             "atan2": 2, "abs": 1}


# -- abstract syntax tree -------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class IntPow:
    base: "Expression"
    exponent: int


@dataclass(frozen=True)
class Pow:
    base: "Expression"
    exponent: "Expression"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Expression = Union[Num, Var, Neg, BinOp, IntPow, Pow, Call]


# -- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
  | (?P<ws>\s+)
""", re.VERBOSE)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        match = _TOKEN_RE.match(source, pos)
        if match is None:
            raise ParseError(f"unexpected character {source[pos]!r}", pos)
        if match.lastgroup == "num":
            tokens.append(("num", match.group(), pos))
        elif match.lastgroup == "ident":
            tokens.append(("ident", match.group(), pos))
        elif match.lastgroup == "op":
            tokens.append(("op", match.group(), pos))
        pos = match.end()
    tokens.append(("end", "", len(source)))
    return tokens


# -- parser ----------------------------------------------------------------

_VAR_RE = re.compile(r"^([qp])([0-9]+)$")


class _Parser:
    def __init__(self, tokens, m: int, allow_p0: bool):
        self.tokens = tokens
        self.i = 0
        self.m = m
        self.allow_p0 = allow_p0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ParseError(f"expected {op!r}", pos)
        return self.advance()

    def parse_expr(self):
        node = self.parse_term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = BinOp(text, node, self.parse_term())
            else:
                return node

    def parse_term(self):
        node = self.parse_unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = BinOp(text, node, self.parse_unary())
            else:
                return node

    def parse_unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.parse_unary())
        return self.parse_power()

    def parse_power(self):
        base = self.parse_atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            exponent = self.parse_unary()
            return _make_pow(base, exponent)
        return base

    def parse_atom(self):
        kind, text, pos = self.advance()
        if kind == "num":
            return Num(float(text))
        if kind == "op" and text == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        if kind == "ident":
            if self.peek()[:2] == ("op", "("):
                return self.parse_call(text, pos)
            return self.resolve_variable(text, pos)
        if kind == "end":
            raise ParseError("unexpected end of input", pos)
        raise ParseError(f"unexpected token {text!r}", pos)

    def parse_call(self, name: str, pos: int):
        if name not in FUNCTIONS:
            raise ParseError(f"unknown function {name!r}", pos)
        self.expect_op("(")
        args = [self.parse_expr()]
        while self.peek()[:2] == ("op", ","):
            self.advance()
            args.append(self.parse_expr())
        self.expect_op(")")
        if len(args) != FUNCTIONS[name]:
            raise ArityError(
                f"{name} takes {FUNCTIONS[name]} argument(s), got {len(args)}", pos)
        return Call(name, tuple(args))

    def resolve_variable(self, name: str, pos: int):
        if name == "t":
            return Var("t")
        if name == "p0":
            if not self.allow_p0:
                raise ParseError(
                    "p0 is only valid on the extended phase space", pos)
            return Var("p0")
        match = _VAR_RE.match(name)
        if match is None:
            raise ParseError(f"unknown identifier {name!r}", pos)
        index = int(match.group(2))
        if index < 1 or index > self.m:
            raise VariableIndexError(
                f"{name} out of range for m={self.m}", pos)
        return Var(name)


def _make_pow(base, exponent):
    if isinstance(exponent, Num) and exponent.value.is_integer():
        return IntPow(base, int(exponent.value))
    if (isinstance(exponent, Neg) and isinstance(exponent.arg, Num)
            and exponent.arg.value.is_integer()):
        return IntPow(base, -int(exponent.arg.value))
    return Pow(base, exponent)


def parse(source: str, m: int, allow_p0: bool = False) -> Expression:
    """Parse ``source`` into an expression tree over an m-degree system.

    Raises :class:`ParseError` (with character offset) on malformed input,
    :class:`ArityError` on wrong function arity, and
    :class:`VariableIndexError` for coordinate indices above ``m``.
    """
    if not source or not source.strip():
        raise ParseError("empty expression", 0)
    parser = _Parser(_tokenize(source), m, allow_p0)
    node = parser.parse_expr()
    kind, text, pos = parser.peek()
    if kind != "end":
        raise ParseError(f"unexpected token {text!r}", pos)
    return node


# -- pretty printer ---------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return _PREC_ADD if node.op in "+-" else _PREC_MUL
    if isinstance(node, Neg):
        return _PREC_NEG
    if isinstance(node, (IntPow, Pow)):
        return _PREC_POW
    return _PREC_ATOM


def to_source(node, min_prec: int = 0) -> str:
    """Render a tree to canonical text; the result re-parses to the same tree."""
    if isinstance(node, Num):
        text = repr(node.value)
    elif isinstance(node, Var):
        text = node.name
    elif isinstance(node, Neg):
        text = "-" + to_source(node.arg, _PREC_NEG)
    elif isinstance(node, BinOp):
        own = _prec(node)
        sep = f" {node.op} " if node.op in "+-" else node.op
        text = to_source(node.left, own) + sep + to_source(node.right, own + 1)
    elif isinstance(node, IntPow):
        text = f"{to_source(node.base, _PREC_ATOM)}^{node.exponent}"
    elif isinstance(node, Pow):
        text = (to_source(node.base, _PREC_ATOM) + "^"
                + to_source(node.exponent, _PREC_NEG))
    elif isinstance(node, Call):
        text = node.func + "(" + ", ".join(to_source(a) for a in node.args) + ")"
    else:
        raise TypeError(f"not an expression node: {node!r}")
    if _prec(node) < min_prec:
        return "(" + text + ")"
    return text


def node_count(node) -> int:
    """Number of tree nodes; inline integer exponents are not counted."""
    if isinstance(node, (Num, Var)):
        return 1
    if isinstance(node, Neg):
        return 1 + node_count(node.arg)
    if isinstance(node, BinOp):
        return 1 + node_count(node.left) + node_count(node.right)
    if isinstance(node, IntPow):
        return 1 + node_count(node.base)
    if isinstance(node, Pow):
        return 1 + node_count(node.base) + node_count(node.exponent)
    if isinstance(node, Call):
        return 1 + sum(node_count(a) for a in node.args)
    raise TypeError(f"not an expression node: {node!r}")


def free_variables(node) -> frozenset:
    if isinstance(node, Num):
        return frozenset()
    if isinstance(node, Var):
        return frozenset((node.name,))
    if isinstance(node, Neg):
        return free_variables(node.arg)
    if isinstance(node, BinOp):
        return free_variables(node.left) | free_variables(node.right)
    if isinstance(node, IntPow):
        return free_variables(node.base)
    if isinstance(node, Pow):
        return free_variables(node.base) | free_variables(node.exponent)
    if isinstance(node, Call):
        out = frozenset()
        for a in node.args:
            out |= free_variables(a)
        return out
    raise TypeError(f"not an expression node: {node!r}")


# -- generic evaluation (floats or Dual2) -----------------------------------

_DMATH = {"sin": duals.sin, "cos": duals.cos, "tan": duals.tan,
          "exp": duals.exp, "log": duals.log, "sqrt": duals.sqrt,
          "atan2": duals.atan2, "abs": duals.fabs}


def _eval_node(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise MissingVariable(f"no value for variable {node.name!r}") from None
    if isinstance(node, Neg):
        return -_eval_node(node.arg, env)
    if isinstance(node, BinOp):
        a = _eval_node(node.left, env)
        b = _eval_node(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return a / b
    if isinstance(node, IntPow):
        return _eval_node(node.base, env) ** node.exponent
    if isinstance(node, Pow):
        base = _eval_node(node.base, env)
        exponent = _eval_node(node.exponent, env)
        if isinstance(base, Dual2) or isinstance(exponent, Dual2):
            if not isinstance(base, Dual2):
                base = Dual2.constant(base, len(exponent.first))
            return base ** exponent
        return math.pow(base, exponent)
    if isinstance(node, Call):
        return _DMATH[node.func](*(_eval_node(a, env) for a in node.args))
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(node, assignment: Mapping[str, float]) -> float:
    """Evaluate a tree at a variable assignment.

    Raises :class:`MissingVariable` when the assignment does not cover the
    tree, and :class:`EvalError` for domain violations or non-finite results;
    NaN and infinity never escape silently.
    """
    try:
        value = _eval_node(node, assignment)
    except (ValueError, ZeroDivisionError, OverflowError) as exc:
        raise EvalError(str(exc)) from exc
    if not math.isfinite(value):
        raise EvalError(f"non-finite result {value}")
    return value


# -- compiled float evaluation ----------------------------------------------

def _compile_value(node, index: Mapping[str, int]) -> Callable:
    if isinstance(node, Num):
        c = node.value
        return lambda vals: c
    if isinstance(node, Var):
        i = index[node.name]
        return lambda vals: vals[i]
    if isinstance(node, Neg):
        fa = _compile_value(node.arg, index)
        return lambda vals: -fa(vals)
    if isinstance(node, BinOp):
        fa = _compile_value(node.left, index)
        fb = _compile_value(node.right, index)
        if node.op == "+":
            return lambda vals: fa(vals) + fb(vals)
        if node.op == "-":
            return lambda vals: fa(vals) - fb(vals)
        if node.op == "*":
            return lambda vals: fa(vals) * fb(vals)
        return lambda vals: fa(vals) / fb(vals)
    if isinstance(node, IntPow):
        fa = _compile_value(node.base, index)
        k = node.exponent
        return lambda vals: fa(vals) ** k
    if isinstance(node, Pow):
        fa = _compile_value(node.base, index)
        fb = _compile_value(node.exponent, index)
        return lambda vals: math.pow(fa(vals), fb(vals))
    if isinstance(node, Call):
        fns = [_compile_value(a, index) for a in node.args]
        if node.func == "atan2":
            fy, fx = fns
            return lambda vals: math.atan2(fy(vals), fx(vals))
        if node.func == "abs":
            fa, = fns
            return lambda vals: abs(fa(vals))
        fn = getattr(math, node.func)
        fa, = fns
        return lambda vals: fn(fa(vals))
    raise TypeError(f"not an expression node: {node!r}")


# -- compiled first-derivative evaluation ------------------------------------
#
# Duals here are plain (value, partials-tuple) pairs; closures combine the
# children's pairs directly, which keeps the integrator right-hand sides cheap.

def _compile_grad(node, index: Mapping[str, int], nvars: int) -> Callable:
    zero = (0.0,) * nvars

    def compile_node(node):
        if isinstance(node, Num):
            c = node.value
            return lambda vals: (c, zero)
        if isinstance(node, Var):
            i = index[node.name]
            seed = tuple(1.0 if j == i else 0.0 for j in range(nvars))
            return lambda vals: (vals[i], seed)
        if isinstance(node, Neg):
            fa = compile_node(node.arg)

            def neg(vals):
                v, d = fa(vals)
                return -v, tuple(-x for x in d)
            return neg
        if isinstance(node, BinOp):
            fa = compile_node(node.left)
            fb = compile_node(node.right)
            if node.op == "+":
                def add(vals):
                    va, da = fa(vals)
                    vb, db = fb(vals)
                    return va + vb, tuple(x + y for x, y in zip(da, db))
                return add
            if node.op == "-":
                def sub(vals):
                    va, da = fa(vals)
                    vb, db = fb(vals)
                    return va - vb, tuple(x - y for x, y in zip(da, db))
                return sub
            if node.op == "*":
                def mul(vals):
                    va, da = fa(vals)
                    vb, db = fb(vals)
                    return va * vb, tuple(x * vb + va * y for x, y in zip(da, db))
                return mul

            def div(vals):
                va, da = fa(vals)
                vb, db = fb(vals)
                w = 1.0 / vb
                v = va * w
                return v, tuple((x - v * y) * w for x, y in zip(da, db))
            return div
        if isinstance(node, IntPow):
            fa = compile_node(node.base)
            k = node.exponent
            if k == 0:
                return lambda vals: (1.0, zero)
            if k == 1:
                return fa

            def ipow(vals):
                v, d = fa(vals)
                s = k * v ** (k - 1)
                return v ** k, tuple(s * x for x in d)
            return ipow
        if isinstance(node, Pow):
            fa = compile_node(node.base)
            fb = compile_node(node.exponent)

            def gpow(vals):
                vb_, db = fb(vals)
                va, da = fa(vals)
                v = math.pow(va, vb_)
                du = vb_ * math.pow(va, vb_ - 1.0)
                dv = v * math.log(va)
                return v, tuple(du * x + dv * y for x, y in zip(da, db))
            return gpow
        if isinstance(node, Call):
            if node.func == "atan2":
                fy = compile_node(node.args[0])
                fx = compile_node(node.args[1])

                def gatan2(vals):
                    vy, dy = fy(vals)
                    vx, dx = fx(vals)
                    r2 = vx * vx + vy * vy
                    cy = vx / r2
                    cx = -vy / r2
                    return (math.atan2(vy, vx),
                            tuple(cy * a + cx * b for a, b in zip(dy, dx)))
                return gatan2
            fa = compile_node(node.args[0])
            rule = _GRAD_RULES[node.func]

            def chain(vals):
                v, d = fa(vals)
                f, df = rule(v)
                return f, tuple(df * x for x in d)
            return chain
        raise TypeError(f"not an expression node: {node!r}")

    return compile_node(node)


def _grad_abs(v):
    return abs(v), (1.0 if v > 0.0 else (-1.0 if v < 0.0 else 0.0))


def _grad_sqrt(v):
    s = math.sqrt(v)
    return s, 0.5 / s


def _grad_tan(v):
    f = math.tan(v)
    return f, 1.0 + f * f


def _grad_exp(v):
    f = math.exp(v)
    return f, f


def _grad_log(v):
    return math.log(v), 1.0 / v


_GRAD_RULES = {
    "sin": lambda v: (math.sin(v), math.cos(v)),
    "cos": lambda v: (math.cos(v), -math.sin(v)),
    "tan": _grad_tan,
    "exp": _grad_exp,
    "log": _grad_log,
    "sqrt": _grad_sqrt,
    "abs": _grad_abs,
}


# -- fields ------------------------------------------------------------------

@dataclass(frozen=True)
class Gradient:
    """First partial derivatives of a field at a point."""
    value: float
    dt: float
    dq: np.ndarray
    dp: np.ndarray
    dp0: float = 0.0


@dataclass(frozen=True)
class Hessian:
    """Second partial derivatives over (t, q1..qm, p1..pm[, p0])."""
    gradient: Gradient
    matrix: np.ndarray


def _validate_tree(node, m: int, allow_p0: bool):
    allowed = {"t"} | {f"q{i}" for i in range(1, m + 1)} \
        | {f"p{i}" for i in range(1, m + 1)} | ({"p0"} if allow_p0 else set())
    bad = free_variables(node) - allowed
    if bad:
        raise ValueError(f"variables {sorted(bad)} not valid for m={m}, "
                         f"allow_p0={allow_p0}")


class ScalarField:
    """A differentiable real function on (extended) phase space.

    Wraps an expression tree together with the number of degrees of freedom
    ``m``, providing exact value/gradient/Hessian evaluation at phase points.
    Immutable and safely shareable; evaluation keeps no hidden state.
    """

    def __init__(self, expression: Expression, m: int, allow_p0: bool = False,
                 name: str = ""):
        _validate_tree(expression, m, allow_p0)
        self.expression = expression
        self.m = m
        self.allow_p0 = allow_p0
        self.name = name
        names = ["t"] + [f"q{i}" for i in range(1, m + 1)] \
            + [f"p{i}" for i in range(1, m + 1)]
        if allow_p0:
            names.append("p0")
        self.variables = tuple(names)
        self._index = {v: i for i, v in enumerate(names)}
        self._nvars = len(names)
        self._value_fn = None
        self._grad_fn = None

    @classmethod
    def from_source(cls, source: str, m: int, allow_p0: bool = False,
                    name: str = "") -> "ScalarField":
        return cls(parse(source, m, allow_p0), m, allow_p0, name or source)

    def __repr__(self):
        return f"ScalarField({self.name or to_source(self.expression)!r}, m={self.m})"

    @property
    def source(self) -> str:
        return to_source(self.expression)

    @property
    def time_independent(self) -> bool:
        return "t" not in free_variables(self.expression)

    # -- evaluation --------------------------------------------------------

    def _vals(self, t, q, p, p0):
        if self.allow_p0:
            if p0 is None:
                raise MissingVariable(f"{self.name or 'field'} requires p0")
            return (t, *q, *p, p0)
        return (t, *q, *p)

    def value_at(self, t: float, q, p, p0: float | None = None) -> float:
        if self._value_fn is None:
            self._value_fn = _compile_value(self.expression, self._index)
        try:
            value = self._value_fn(self._vals(t, q, p, p0))
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise EvalError(f"{self.name or 'field'}: {exc}") from exc
        if not math.isfinite(value):
            raise EvalError(f"{self.name or 'field'}: non-finite value {value}")
        return value

    def compiled_gradient(self) -> Callable:
        """Raw compiled closure mapping a value tuple (t, q.., p..[, p0]) to
        (value, partials-tuple); the fast path for integrator right-hand sides."""
        if self._grad_fn is None:
            self._grad_fn = _compile_grad(self.expression, self._index, self._nvars)
        return self._grad_fn

    def gradient_at(self, t: float, q, p, p0: float | None = None) -> Gradient:
        if self._grad_fn is None:
            self._grad_fn = _compile_grad(self.expression, self._index, self._nvars)
        try:
            value, d = self._grad_fn(self._vals(t, q, p, p0))
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise EvalError(f"{self.name or 'field'}: {exc}") from exc
        if not math.isfinite(value) or not all(map(math.isfinite, d)):
            raise EvalError(f"{self.name or 'field'}: non-finite derivative")
        m = self.m
        return Gradient(value=value, dt=d[0],
                        dq=np.array(d[1:m + 1]), dp=np.array(d[m + 1:2 * m + 1]),
                        dp0=d[2 * m + 1] if self.allow_p0 else 0.0)

    def hessian_at(self, t: float, q, p, p0: float | None = None) -> Hessian:
        vals = self._vals(t, q, p, p0)
        seeds = duals.seed_variables(vals)
        env = dict(zip(self.variables, seeds))
        try:
            out = _eval_node(self.expression, env)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise EvalError(f"{self.name or 'field'}: {exc}") from exc
        if not isinstance(out, Dual2):
            out = Dual2.constant(out, self._nvars)
        if not (math.isfinite(out.value) and np.isfinite(out.first).all()
                and np.isfinite(out.second).all()):
            raise EvalError(f"{self.name or 'field'}: non-finite Hessian")
        m = self.m
        grad = Gradient(value=out.value, dt=out.first[0],
                        dq=out.first[1:m + 1], dp=out.first[m + 1:2 * m + 1],
                        dp0=out.first[2 * m + 1] if self.allow_p0 else 0.0)
        return Hessian(gradient=grad, matrix=out.second)

    def eval_with(self, env: Mapping) -> float | Dual2:
        """Evaluate with an arbitrary assignment (floats or Dual2 seeds)."""
        try:
            return _eval_node(self.expression, env)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise EvalError(f"{self.name or 'field'}: {exc}") from exc


class FunctionField:
    """Adapter presenting a Python callable ``fn(t, q, p)`` as a field.

    ``fn`` receives scalars (floats or :class:`Dual2`) for ``t`` and tuples
    for ``q`` and ``p``, and must be written against the math functions in
    :mod:`hamverify.duals` so derivatives propagate.
    """

    def __init__(self, fn: Callable, m: int, name: str = ""):
        self.fn = fn
        self.m = m
        self.allow_p0 = False
        self.name = name or getattr(fn, "__name__", "callable")

    def __repr__(self):
        return f"FunctionField({self.name!r}, m={self.m})"

    @property
    def time_independent(self) -> bool:
        return False  # unknown for opaque callables; be conservative

    def value_at(self, t: float, q, p, p0=None) -> float:
        try:
            value = float(self.fn(t, tuple(q), tuple(p)))
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise EvalError(f"{self.name}: {exc}") from exc
        if not math.isfinite(value):
            raise EvalError(f"{self.name}: non-finite value {value}")
        return value

    def _dual_eval(self, t, q, p) -> Dual2:
        nvars = 2 * self.m + 1
        seeds = duals.seed_variables((t, *q, *p), nvars)
        out = self.fn(seeds[0], tuple(seeds[1:self.m + 1]),
                      tuple(seeds[self.m + 1:]))
        if not isinstance(out, Dual2):
            out = Dual2.constant(out, nvars)
        return out

    def gradient_at(self, t: float, q, p, p0=None) -> Gradient:
        try:
            out = self._dual_eval(t, q, p)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise EvalError(f"{self.name}: {exc}") from exc
        m = self.m
        return Gradient(value=out.value, dt=out.first[0],
                        dq=out.first[1:m + 1], dp=out.first[m + 1:2 * m + 1])

    def hessian_at(self, t: float, q, p, p0=None) -> Hessian:
        try:
            out = self._dual_eval(t, q, p)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise EvalError(f"{self.name}: {exc}") from exc
        m = self.m
        grad = Gradient(value=out.value, dt=out.first[0],
                        dq=out.first[1:m + 1], dp=out.first[m + 1:2 * m + 1])
        return Hessian(gradient=grad, matrix=out.second)
