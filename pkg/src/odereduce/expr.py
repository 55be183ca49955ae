"""Scalar expression trees: parsing, printing, substitution and evaluation.

Expressions are immutable trees over a closed primitive set.  Evaluation
goes through a small compiler that turns a tree into nested closures over
an arithmetic backend, so the same tree can be evaluated on floats or on
:class:`odereduce.dual.Dual2` numbers.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .errors import DivisionByZero, DomainError, ExprSyntaxError, UnknownIdentifier

FUNCTIONS = ("sin", "cos", "tan", "exp", "ln", "sqrt", "asin", "acos", "atan",
             "sinh", "cosh", "abs")

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ()
    precedence = 5

    def __post_init__(self):
        for name in ("left", "right", "operand", "base", "exponent", "arg"):
            if name in self.__dataclass_fields__ and not isinstance(getattr(self, name), Expr):
                raise TypeError(f"{type(self).__name__}.{name} must be an Expr, "
                                f"got {getattr(self, name)!r}")

    def variables(self) -> frozenset[str]:
        out: set[str] = set()
        for node in walk(self):
            if isinstance(node, Variable):
                out.add(node.name)
        return frozenset(out)

    def __str__(self) -> str:
        return to_string(self)

    # building helpers, used by modules that assemble closed forms
    def __add__(self, other):
        return Add(self, as_expr(other))

    def __radd__(self, other):
        return Add(as_expr(other), self)

    def __sub__(self, other):
        return Sub(self, as_expr(other))

    def __rsub__(self, other):
        return Sub(as_expr(other), self)

    def __mul__(self, other):
        return Mul(self, as_expr(other))

    def __rmul__(self, other):
        return Mul(as_expr(other), self)

    def __truediv__(self, other):
        return Div(self, as_expr(other))

    def __rtruediv__(self, other):
        return Div(as_expr(other), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, other):
        return Pow(self, as_expr(other))


@dataclass(frozen=True, eq=True)
class Constant(Expr):
    value: float
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        v = float(self.value)
        if not math.isfinite(v):
            raise ValueError(f"non-finite constant {self.value!r}")
        object.__setattr__(self, "value", v)

    @property
    def precedence(self):
        return 3 if self.value < 0 or str(self.value).startswith("-") else 5


@dataclass(frozen=True, eq=True)
class Variable(Expr):
    name: str
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        if not _IDENT.match(self.name) or self.name in FUNCTIONS:
            raise ValueError(f"invalid variable name {self.name!r}")


@dataclass(frozen=True, eq=True)
class Add(Expr):
    left: Expr
    right: Expr
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)
    precedence = 1


@dataclass(frozen=True, eq=True)
class Sub(Expr):
    left: Expr
    right: Expr
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)
    precedence = 1


@dataclass(frozen=True, eq=True)
class Mul(Expr):
    left: Expr
    right: Expr
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)
    precedence = 2


@dataclass(frozen=True, eq=True)
class Div(Expr):
    left: Expr
    right: Expr
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)
    precedence = 2


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    operand: Expr
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)
    precedence = 3


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: Expr
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)
    precedence = 4


@dataclass(frozen=True, eq=True)
class Func(Expr):
    name: str
    arg: Expr
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        super().__post_init__()
        if self.name not in FUNCTIONS:
            raise ValueError(f"unknown function {self.name!r}")


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)):
        if value < 0:
            return Neg(Constant(-value))
        return Constant(value)
    raise TypeError(f"cannot convert {value!r} to Expr")


def children(node: Expr) -> tuple[Expr, ...]:
    if isinstance(node, (Constant, Variable)):
        return ()
    if isinstance(node, Neg):
        return (node.operand,)
    if isinstance(node, Func):
        return (node.arg,)
    if isinstance(node, Pow):
        return (node.base, node.exponent)
    return (node.left, node.right)


def walk(node: Expr) -> Iterable[Expr]:
    stack = [node]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(children(cur))


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, allowed: frozenset[str]):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.allowed = allowed

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos, self.text)

    def parse(self) -> Expr:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", pos, self.text)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return Pow(base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "num":
            return Constant(float(text))
        if kind == "ident":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(text, arg)
            if text not in self.allowed:
                raise UnknownIdentifier(text, pos)
            return Variable(text)
        if (kind, text) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", pos, self.text)


def parse(text: str, variables: Iterable[str]) -> Expr:
    """Parse ``text`` into an expression tree over ``variables``.

    Precedence, tightest first: ``^`` (right associative), unary minus,
    ``* /``, ``+ -``.  So ``-x^2`` is ``-(x^2)`` and ``2^-1`` is legal.
    """
    return _Parser(text, frozenset(variables)).parse()


# --------------------------------------------------------------- printing

def _fmt_const(v: float) -> str:
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_string(node: Expr) -> str:
    if isinstance(node, Constant):
        return _fmt_const(node.value)
    if isinstance(node, Variable):
        return node.name
    if isinstance(node, Func):
        return f"{node.name}({to_string(node.arg)})"
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, node.operand.precedence < 3)
    if isinstance(node, Pow):
        base = _wrap(node.base, node.base.precedence < 5)
        exp = _wrap(node.exponent, node.exponent.precedence < 3)
        return f"{base}^{exp}"
    prec = node.precedence
    sym = {Add: " + ", Sub: " - ", Mul: "*", Div: "/"}[type(node)]
    left = _wrap(node.left, node.left.precedence < prec)
    right = _wrap(node.right, node.right.precedence <= prec or node.right.precedence == 3)
    return f"{left}{sym}{right}"


def _wrap(node: Expr, parens: bool) -> str:
    s = to_string(node)
    return f"({s})" if parens else s


# ----------------------------------------------------------- substitution

def substitute(node: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions (simultaneously)."""
    if isinstance(node, Variable):
        return mapping.get(node.name, node)
    if isinstance(node, Constant):
        return node
    if isinstance(node, Neg):
        return Neg(substitute(node.operand, mapping))
    if isinstance(node, Func):
        return Func(node.name, substitute(node.arg, mapping))
    if isinstance(node, Pow):
        return Pow(substitute(node.base, mapping), substitute(node.exponent, mapping))
    return type(node)(substitute(node.left, mapping), substitute(node.right, mapping))


def rename(node: Expr, mapping: Mapping[str, str]) -> Expr:
    return substitute(node, {k: Variable(v) for k, v in mapping.items()})


# ------------------------------------------------------------- evaluation

def _fdiv(a: float, b: float) -> float:
    if b == 0.0:
        raise DivisionByZero("division by zero", operation="evaluate")
    return a / b


def _fpow(a: float, b: float) -> float:
    try:
        if float(b).is_integer():
            n = int(b)
            if a == 0.0 and n < 0:
                raise DivisionByZero("zero raised to a negative power", operation="evaluate")
            return float(a) ** n
        if a <= 0.0:
            raise DomainError(f"non-integer power {b!r} of non-positive base {a!r}",
                              operation="evaluate")
        return math.pow(a, b)
    except OverflowError:
        raise DomainError("overflow in power", operation="evaluate") from None


def _guard(fn: Callable[[float], float], name: str, ok: Callable[[float], bool] | None = None):
    def wrapped(u: float) -> float:
        if ok is not None and not ok(u):
            raise DomainError(f"{name}({u!r}) is outside the function domain",
                              operation="evaluate", argument=u)
        try:
            return fn(u)
        except OverflowError:
            raise DomainError(f"overflow in {name}({u!r})", operation="evaluate") from None
        except ValueError:
            raise DomainError(f"{name}({u!r}) is outside the function domain",
                              operation="evaluate") from None
    return wrapped


class FloatBackend:
    name = "float"
    div = staticmethod(_fdiv)
    pow = staticmethod(_fpow)
    functions = {
        "sin": _guard(math.sin, "sin"),
        "cos": _guard(math.cos, "cos"),
        "tan": _guard(math.tan, "tan"),
        "exp": _guard(math.exp, "exp"),
        "ln": _guard(math.log, "ln", lambda u: u > 0.0),
        "sqrt": _guard(math.sqrt, "sqrt", lambda u: u >= 0.0),
        "asin": _guard(math.asin, "asin", lambda u: -1.0 <= u <= 1.0),
        "acos": _guard(math.acos, "acos", lambda u: -1.0 <= u <= 1.0),
        "atan": _guard(math.atan, "atan"),
        "sinh": _guard(math.sinh, "sinh"),
        "cosh": _guard(math.cosh, "cosh"),
        "abs": abs,
    }

    @staticmethod
    def const(v: float):
        return v


def compile_expr(node: Expr, names: tuple[str, ...], backend=FloatBackend) -> Callable:
    """Compile ``node`` to ``fn(args)`` where ``args`` is a sequence ordered as ``names``."""
    key = (backend.name, names)
    cached = node._cache.get(key)
    if cached is not None:
        return cached
    index = {n: i for i, n in enumerate(names)}
    fn = _compile(node, index, backend)
    node._cache[key] = fn
    return fn


def _compile(node: Expr, index: dict[str, int], B) -> Callable:
    if isinstance(node, Constant):
        c = B.const(node.value)
        return lambda a: c
    if isinstance(node, Variable):
        try:
            i = index[node.name]
        except KeyError:
            raise DomainError(f"variable {node.name!r} is not bound",
                              operation="evaluate") from None
        return lambda a: a[i]
    if isinstance(node, Neg):
        f = _compile(node.operand, index, B)
        return lambda a: -f(a)
    if isinstance(node, Func):
        f = _compile(node.arg, index, B)
        g = B.functions[node.name]
        return lambda a: g(f(a))
    if isinstance(node, Pow):
        f = _compile(node.base, index, B)
        g = _compile(node.exponent, index, B)
        p = B.pow
        return lambda a: p(f(a), g(a))
    f = _compile(node.left, index, B)
    g = _compile(node.right, index, B)
    if isinstance(node, Add):
        return lambda a: f(a) + g(a)
    if isinstance(node, Sub):
        return lambda a: f(a) - g(a)
    if isinstance(node, Mul):
        return lambda a: f(a) * g(a)
    d = B.div
    return lambda a: d(f(a), g(a))


def evaluate(node: Expr, env: Mapping[str, float]) -> float:
    """Evaluate in double precision; raises DomainError / DivisionByZero."""
    names = tuple(sorted(env))
    fn = compile_expr(node, names)
    return float(fn(tuple(float(env[n]) for n in names)))


def lambdify(node: Expr, names: Iterable[str]) -> Callable[..., float]:
    """Return ``f(*values)`` evaluating ``node`` with positional arguments."""
    names = tuple(names)
    fn = compile_expr(node, names)
    return lambda *values: fn(values)
