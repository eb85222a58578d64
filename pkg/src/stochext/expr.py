"""Formula trees: parsing, printing, evaluation and symbolic differentiation.

Grammar (whitespace ignored)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := ("-" | "+") unary | power
    power   := primary ("^" unary)?          # right-associative
    primary := NUMBER | "pi" | "t" | "w1".."w9"
             | NAME "(" expr ("," expr)* ")" | "(" expr ")"

Functions: ``sin cos exp log sqrt`` and ``flatexp(x)`` / ``flatexp(x, p)``,
the flat exponential ``x^-p * exp(-1/x)`` for ``x > 0`` and ``0`` otherwise.
``flatexp`` is the building block of smooth cutoff functions; it is closed
under differentiation.  Exponents must fold to integer constants.

Trees are immutable and every function here is pure.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import DomainError, ParseError, UnknownIdentifierError, VariableIndexError

__all__ = [
    "Expr", "Const", "Var", "Add", "Sub", "Mul", "Div", "Pow", "Neg", "Func", "FlatExp",
    "parse", "to_string", "evaluate", "diff", "simplify", "variables", "ProcessSpec",
    "FLAT_GUARD", "MAX_OMEGA_VARS",
]

MAX_OMEGA_VARS = 9
# flatexp(u) is taken as 0 for u below this; exp(-1/u) underflows long before.
FLAT_GUARD = 1e-12

Number = Union[float, np.ndarray]


class Expr:
    """Base node.  Supports ``e(t=..., w1=...)`` as a shortcut for evaluate."""

    __slots__ = ()

    def __call__(self, point=None, **kwargs):
        return evaluate(self, point, **kwargs)

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Func(Expr):
    name: str
    arg: Expr


@dataclass(frozen=True)
class FlatExp(Expr):
    arg: Expr
    power: int = 0


FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")
ZERO = Const(0.0)
ONE = Const(1.0)
T = Var("t")

# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(source):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {source[pos]!r}", pos)
        start = m.start(m.lastgroup)
        tokens.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source, omega_dim):
        self.source = source
        self.omega_dim = omega_dim
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        kind, text, pos = self.take()
        if kind != "op" or text != op:
            raise ParseError(f"expected {op!r}, got {text or 'end of input'!r}", pos)

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.take()
                rhs = self.term()
                node = Add(node, rhs) if text == "+" else Sub(node, rhs)
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.take()
                rhs = self.unary()
                node = Mul(node, rhs) if text == "*" else Div(node, rhs)
            else:
                return node

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.primary()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.take()
            exp_pos = self.peek()[2]
            exponent = simplify(self.unary())
            if not isinstance(exponent, Const):
                raise ParseError("exponent must be a constant integer", exp_pos)
            value = exponent.value
            if not float(value).is_integer():
                raise ParseError(f"exponent {value!r} is not an integer", exp_pos)
            return Pow(base, int(value))
        return base

    def primary(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                return self.call(text, pos)
            if text == "pi":
                return Const(math.pi)
            if text == "t":
                return T
            m = re.fullmatch(r"w([1-9])", text)
            if m:
                idx = int(m.group(1))
                if idx > self.omega_dim:
                    raise VariableIndexError(
                        f"variable {text} exceeds omega dimension {self.omega_dim}", pos)
                return Var(text)
            raise UnknownIdentifierError(f"unknown identifier {text!r}", pos)
        raise ParseError(f"unexpected {text or 'end of input'!r}", pos)

    def call(self, name, pos):
        if name not in FUNCTIONS and name != "flatexp":
            raise UnknownIdentifierError(f"unknown function {name!r}", pos)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[0] == "op" and self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        if name == "flatexp":
            if len(args) == 1:
                return FlatExp(args[0], 0)
            if len(args) == 2:
                p = simplify(args[1])
                if not isinstance(p, Const) or not float(p.value).is_integer() or p.value < 0:
                    raise ParseError("flatexp power must be a non-negative integer constant", pos)
                return FlatExp(args[0], int(p.value))
            raise ParseError("flatexp takes one or two arguments", pos)
        if len(args) != 1:
            raise ParseError(f"{name} takes exactly one argument", pos)
        return Func(name, args[0])


def parse(source: str, omega_dim: int = 0) -> Expr:
    """Parse infix formula text over ``t`` and ``w1..w<omega_dim>``."""
    if not 0 <= omega_dim <= MAX_OMEGA_VARS:
        raise ValueError(f"omega_dim must be in [0, {MAX_OMEGA_VARS}]")
    return _Parser(source, omega_dim).parse()


# --------------------------------------------------------------------------
# printing

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _prec(e):
    if isinstance(e, Const) and (e.value < 0 or math.copysign(1.0, e.value) < 0):
        return 3
    return _PREC.get(type(e), 5)


def _wrap(e, need_parens):
    s = to_string(e)
    return f"({s})" if need_parens else s


def to_string(e: Expr) -> str:
    """Print ``e`` so that ``parse(to_string(e))`` evaluates identically."""
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, (Add, Sub, Mul, Div)):
        op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
        p = _PREC[type(e)]
        left = _wrap(e.left, _prec(e.left) < p or _prec(e.left) == 3)
        right = _wrap(e.right, _prec(e.right) <= p or _prec(e.right) == 3)
        return f"{left} {op} {right}"
    if isinstance(e, Pow):
        base = _wrap(e.base, _prec(e.base) <= 4)
        exp = str(e.exponent) if e.exponent >= 0 else f"({e.exponent})"
        return f"{base}^{exp}"
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, _prec(e.arg) <= 3)
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    if isinstance(e, FlatExp):
        if e.power == 0:
            return f"flatexp({to_string(e.arg)})"
        return f"flatexp({to_string(e.arg)}, {e.power})"
    raise TypeError(f"not an expression: {e!r}")


# --------------------------------------------------------------------------
# evaluation


def variables(e: Expr) -> set:
    """Names of all variables referenced by ``e``."""
    out = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, (Add, Sub, Mul, Div)):
            stack.extend((node.left, node.right))
        elif isinstance(node, Pow):
            stack.append(node.base)
        elif isinstance(node, (Neg, Func, FlatExp)):
            stack.append(node.arg)
    return out


def _ev(e, env):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise DomainError(f"no value supplied for variable {e.name}") from None
    if isinstance(e, Add):
        return _ev(e.left, env) + _ev(e.right, env)
    if isinstance(e, Sub):
        return _ev(e.left, env) - _ev(e.right, env)
    if isinstance(e, Mul):
        return _ev(e.left, env) * _ev(e.right, env)
    if isinstance(e, Div):
        den = _ev(e.right, env)
        if np.any(den == 0):
            raise DomainError("division by zero")
        return _ev(e.left, env) / den
    if isinstance(e, Pow):
        base = _ev(e.base, env)
        if e.exponent < 0 and np.any(base == 0):
            raise DomainError("division by zero (negative power of 0)")
        if isinstance(base, np.ndarray):
            return base ** e.exponent
        return float(base) ** e.exponent
    if isinstance(e, Neg):
        return -_ev(e.arg, env)
    if isinstance(e, Func):
        x = _ev(e.arg, env)
        if e.name == "log":
            if np.any(x <= 0):
                raise DomainError("log of non-positive value")
            return np.log(x)
        if e.name == "sqrt":
            if np.any(x < 0):
                raise DomainError("sqrt of negative value")
            return np.sqrt(x)
        return getattr(np, e.name)(x)
    if isinstance(e, FlatExp):
        x = np.asarray(_ev(e.arg, env), dtype=float)
        pos = x > FLAT_GUARD
        safe = np.where(pos, x, 1.0)
        out = np.where(pos, np.exp(-1.0 / safe) * safe ** (-float(e.power)), 0.0)
        return out if out.ndim else float(out)
    raise TypeError(f"not an expression: {e!r}")


def evaluate(e: Expr, point: Mapping[str, Number] | None = None, **kwargs) -> Number:
    """Evaluate ``e`` at a point given as a mapping and/or keywords.

    Values may be numpy arrays; they broadcast together.  Raises
    :class:`DomainError` on leaving the real domain or a non-finite result.
    """
    env = dict(point or {})
    env.update(kwargs)
    with np.errstate(all="ignore"):
        try:
            value = _ev(e, env)
        except (OverflowError, ZeroDivisionError) as exc:
            raise DomainError(str(exc)) from None
    if not np.all(np.isfinite(value)):
        raise DomainError("non-finite result")
    if isinstance(value, np.ndarray):
        return value
    return float(value)


# --------------------------------------------------------------------------
# simplification and differentiation


def _c(x):
    return isinstance(x, Const)


def _is(x, v):
    return isinstance(x, Const) and x.value == v


def add(a, b):
    if _c(a) and _c(b):
        return Const(a.value + b.value)
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    if isinstance(b, Neg):
        return sub(a, b.arg)
    if _c(b) and b.value < 0:
        return Sub(a, Const(-b.value))
    return Add(a, b)


def sub(a, b):
    if _c(a) and _c(b):
        return Const(a.value - b.value)
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    if isinstance(b, Neg):
        return add(a, b.arg)
    if a == b:
        return ZERO
    return Sub(a, b)


def mul(a, b):
    if _c(a) and _c(b):
        return Const(a.value * b.value)
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if _is(a, -1):
        return neg(b)
    if _is(b, -1):
        return neg(a)
    if isinstance(a, Neg) and isinstance(b, Neg):
        return mul(a.arg, b.arg)
    if isinstance(a, Neg):
        return neg(mul(a.arg, b))
    if isinstance(b, Neg):
        return neg(mul(a, b.arg))
    if _c(b) and not _c(a):
        return Mul(b, a)
    return Mul(a, b)


def div(a, b):
    if _c(a) and _c(b) and b.value != 0:
        return Const(a.value / b.value)
    if _is(a, 0):
        return ZERO
    if _is(b, 1):
        return a
    if isinstance(a, Neg):
        return neg(div(a.arg, b))
    return Div(a, b)


def power(base, n):
    if n == 0:
        return ONE
    if n == 1:
        return base
    if _c(base) and not (base.value == 0 and n < 0):
        return Const(base.value ** n)
    if isinstance(base, Pow):
        return power(base.base, base.exponent * n)
    return Pow(base, n)


def neg(a):
    if _c(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def func(name, arg):
    if _c(arg):
        try:
            return Const(float(evaluate(Func(name, arg))))
        except DomainError:
            pass
    return Func(name, arg)


def simplify(e: Expr) -> Expr:
    """Constant folding plus the +0, *0, *1, /1, ^0, ^1 identities."""
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Add):
        return add(simplify(e.left), simplify(e.right))
    if isinstance(e, Sub):
        return sub(simplify(e.left), simplify(e.right))
    if isinstance(e, Mul):
        return mul(simplify(e.left), simplify(e.right))
    if isinstance(e, Div):
        return div(simplify(e.left), simplify(e.right))
    if isinstance(e, Pow):
        return power(simplify(e.base), e.exponent)
    if isinstance(e, Neg):
        return neg(simplify(e.arg))
    if isinstance(e, Func):
        return func(e.name, simplify(e.arg))
    if isinstance(e, FlatExp):
        return FlatExp(simplify(e.arg), e.power)
    raise TypeError(f"not an expression: {e!r}")


def _d(e, x):
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == x else ZERO
    if isinstance(e, Add):
        return add(_d(e.left, x), _d(e.right, x))
    if isinstance(e, Sub):
        return sub(_d(e.left, x), _d(e.right, x))
    if isinstance(e, Mul):
        return add(mul(_d(e.left, x), e.right), mul(e.left, _d(e.right, x)))
    if isinstance(e, Div):
        da, db = _d(e.left, x), _d(e.right, x)
        if _is(db, 0):
            return div(da, e.right)
        return div(sub(mul(da, e.right), mul(e.left, db)), power(e.right, 2))
    if isinstance(e, Pow):
        du = _d(e.base, x)
        return mul(mul(Const(float(e.exponent)), power(e.base, e.exponent - 1)), du)
    if isinstance(e, Neg):
        return neg(_d(e.arg, x))
    if isinstance(e, Func):
        u = e.arg
        du = _d(u, x)
        if _is(du, 0):
            return ZERO
        if e.name == "sin":
            outer = func("cos", u)
        elif e.name == "cos":
            outer = neg(func("sin", u))
        elif e.name == "exp":
            outer = e
        elif e.name == "log":
            return div(du, u)
        elif e.name == "sqrt":
            return div(du, mul(Const(2.0), e))
        else:  # pragma: no cover
            raise TypeError(e.name)
        return mul(outer, du)
    if isinstance(e, FlatExp):
        du = _d(e.arg, x)
        if _is(du, 0):
            return ZERO
        # d/du u^-p e^{-1/u} = -p u^-(p+1) e^{-1/u} + u^-(p+2) e^{-1/u}
        outer = FlatExp(e.arg, e.power + 2)
        if e.power:
            outer = sub(outer, mul(Const(float(e.power)), FlatExp(e.arg, e.power + 1)))
        return mul(outer, du)
    raise TypeError(f"not an expression: {e!r}")


def diff(e: Expr, var: str = "t", order: int = 1) -> Expr:
    """Symbolic ``order``-th derivative of ``e`` with respect to ``var``."""
    if order < 1:
        raise ValueError("order must be >= 1")
    out = simplify(e)
    for _ in range(order):
        out = _d(out, var)
    return out


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ProcessSpec:
    """A process xi(t, w) = g(t, w) on ``interval`` with ``omega_dim`` random inputs."""

    expr: Expr
    interval: tuple
    omega_dim: int = 0
    source: str = ""

    def __post_init__(self):
        a, b = (float(v) for v in self.interval)
        if not a < b:
            raise ValueError(f"interval must satisfy a < b, got {self.interval}")
        object.__setattr__(self, "interval", (a, b))
        for name in variables(self.expr):
            if name != "t" and int(name[1:]) > self.omega_dim:
                raise VariableIndexError(
                    f"variable {name} exceeds omega dimension {self.omega_dim}")

    @classmethod
    def from_formula(cls, formula, interval, omega_dim=0):
        return cls(parse(formula, omega_dim), tuple(interval), omega_dim, formula)

    @property
    def a(self):
        return self.interval[0]

    @property
    def b(self):
        return self.interval[1]

    def env(self, t, omega):
        """Variable mapping for time(s) ``t`` and an omega point/array of points."""
        env = {"t": t}
        omega = np.asarray(omega, dtype=float)
        for i in range(self.omega_dim):
            env[f"w{i + 1}"] = omega[..., i] if omega.ndim > 1 else omega[i]
        return env

    def check_nonnegative(self, omega_points=None, n_t=257):
        """Raise ValueError if xi < 0 somewhere on a validation grid over [a, b] x omega_points."""
        t = np.linspace(self.a, self.b, n_t)
        if self.omega_dim == 0:
            vals = evaluate(self.expr, t=t) * np.ones_like(t)
        else:
            pts = np.asarray(omega_points, dtype=float).reshape(-1, self.omega_dim)
            env = {"t": t[:, None]}
            for i in range(self.omega_dim):
                env[f"w{i + 1}"] = pts[None, :, i]
            vals = evaluate(self.expr, env) * np.ones((t.size, len(pts)))
        low = float(np.min(vals))
        if low < 0:
            raise ValueError(f"process takes negative values on its domain (min {low:.6g})")
        return low
