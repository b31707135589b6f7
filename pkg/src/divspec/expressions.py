"""Differentiable scalar expression language for scenario-defined fields.

Grammar (highest precedence first):

    power   :=  atom ['^' unary]          # right-associative
    unary   :=  '-' unary | power
    term    :=  unary (('*' | '/') unary)*
    expr    :=  term (('+' | '-') term)*
    atom    :=  number | variable | function '(' expr ')' | '(' expr ')'

Variables are x1..x4; functions are exp, log, sin, cos, tan, sinh, cosh,
sqrt, abs.  Evaluation accepts scalars or numpy arrays per variable, so a
single tree walk covers a whole batch of points.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import EvalDomainError, ExprSyntaxError

VARIABLES = ("x1", "x2", "x3", "x4")

FUNCTIONS = {
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "sqrt": np.sqrt,
    "abs": np.abs,
}


class Expr:
    """Abstract syntax tree node. Immutable; compared structurally."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        return sub(_coerce(other), self)

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __neg__(self):
        return neg(self)

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: float


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, eq=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: Expr


@dataclass(frozen=True, eq=True)
class Call(Expr):
    fn: str
    arg: Expr


ZERO = Num(0.0)
ONE = Num(1.0)


def _coerce(value):
    if isinstance(value, Expr):
        return value
    return Num(float(value))


def _is_num(e, value=None):
    return isinstance(e, Num) and (value is None or e.value == value)


# Folding constructors. Only constant folding and 0/1 identities; no
# general rewriting, so derivative trees stay predictable.

def add(a, b):
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    return Add(a, b)


def sub(a, b):
    if _is_num(a) and _is_num(b):
        return Num(a.value - b.value)
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return neg(b)
    return Sub(a, b)


def neg(a):
    if _is_num(a):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def mul(a, b):
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return ZERO
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    return Mul(a, b)


def div(a, b):
    if _is_num(a, 0.0) and not _is_num(b, 0.0):
        return ZERO
    if _is_num(b, 1.0):
        return a
    if _is_num(a) and _is_num(b) and b.value != 0.0:
        return Num(a.value / b.value)
    if _is_num(b) and b.value != 0.0 and isinstance(a, Mul) and _is_num(a.left):
        return mul(Num(a.left.value / b.value), a.right)
    return Div(a, b)


def pow_(a, b):
    if _is_num(b, 1.0):
        return a
    if _is_num(b, 0.0):
        return ONE
    if _is_num(a) and _is_num(b):
        v = float(a.value) ** float(b.value)
        if np.isfinite(v):
            return Num(v)
    return Pow(a, b)


def call(fn, arg):
    return Call(fn, arg)


# ---------------------------------------------------------------------------
# Parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            # Skip over trailing whitespace before reporting.
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            offset = len(text) - len(stripped)
            raise ExprSyntaxError(f"unexpected character {stripped[0]!r}", offset,
                                  {"number", "variable", "function", "operator"})
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, value, offset = self.peek()
        if kind == "op" and value == op:
            return self.next()
        raise ExprSyntaxError(f"got {value!r}" if value else "unexpected end of input",
                              offset, {repr(op)})

    def parse(self):
        e = self.expr()
        kind, value, offset = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"trailing input {value!r}", offset,
                                  {"'+'", "'-'", "'*'", "'/'", "'^'", "end"})
        return e

    def expr(self):
        e = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.next()
                rhs = self.term()
                e = Add(e, rhs) if value == "+" else Sub(e, rhs)
            else:
                return e

    def term(self):
        e = self.unary()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.next()
                rhs = self.unary()
                e = Mul(e, rhs) if value == "*" else Div(e, rhs)
            else:
                return e

    def unary(self):
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.next()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            self.next()
            # '^' binds tighter than unary minus but is right-associative,
            # so the exponent may start with '-'.
            return Pow(base, self.unary())
        return base

    def atom(self):
        kind, value, offset = self.next()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if value in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(value, arg)
            if value in VARIABLES:
                return Var(value)
            raise ExprSyntaxError(f"unknown name {value!r}", offset,
                                  set(VARIABLES) | set(FUNCTIONS))
        if kind == "op" and value == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        raise ExprSyntaxError(f"got {value!r}" if value else "unexpected end of input",
                              offset, {"number", "variable", "function", "'('", "'-'"})


def parse(text):
    """Parse expression text into an AST.

    Raises ExprSyntaxError carrying the byte offset on malformed input.
    """
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Evaluation

def evaluate(expr, env):
    """Evaluate `expr` with variable values from `env`.

    Values may be floats or numpy arrays (all of one broadcastable shape).
    Returns a float for scalar input, an ndarray otherwise.  Raises
    EvalDomainError if any evaluated entry is non-finite or outside the
    real domain of a function.
    """
    with np.errstate(all="ignore"):
        out = _eval(expr, env)
    bad = ~np.isfinite(out)
    if np.any(bad):
        raise EvalDomainError(
            f"expression {to_text(expr)!r} is undefined at the queried point(s)")
    if np.ndim(out) == 0:
        return float(out)
    return out


def _eval(expr, env):
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        try:
            return env[expr.name]
        except KeyError:
            raise EvalDomainError(f"no value supplied for variable {expr.name}")
    if isinstance(expr, Neg):
        return -_eval(expr.arg, env)
    if isinstance(expr, Add):
        return _eval(expr.left, env) + _eval(expr.right, env)
    if isinstance(expr, Sub):
        return _eval(expr.left, env) - _eval(expr.right, env)
    if isinstance(expr, Mul):
        return _eval(expr.left, env) * _eval(expr.right, env)
    if isinstance(expr, Div):
        return np.divide(_eval(expr.left, env), _eval(expr.right, env))
    if isinstance(expr, Pow):
        return np.power(_eval(expr.base, env), _eval(expr.exponent, env))
    if isinstance(expr, Call):
        return FUNCTIONS[expr.fn](_eval(expr.arg, env))
    raise TypeError(f"not an Expr node: {expr!r}")


# ---------------------------------------------------------------------------
# Differentiation

def differentiate(expr, var):
    """Symbolic partial derivative of `expr` with respect to `var`.

    Only constant folding and 0/1 identities are applied to the result.
    abs differentiates to arg/abs(arg) (a kink at 0: evaluation there
    raises a domain error).
    """
    if var not in VARIABLES:
        raise ValueError(f"unknown variable {var!r}")
    return _diff(expr, var)


def _diff(e, v):
    if isinstance(e, Num):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == v else ZERO
    if isinstance(e, Neg):
        return neg(_diff(e.arg, v))
    if isinstance(e, Add):
        return add(_diff(e.left, v), _diff(e.right, v))
    if isinstance(e, Sub):
        return sub(_diff(e.left, v), _diff(e.right, v))
    if isinstance(e, Mul):
        return add(mul(_diff(e.left, v), e.right), mul(e.left, _diff(e.right, v)))
    if isinstance(e, Div):
        # (u/w)' = u'/w - u w'/w^2
        u, w = e.left, e.right
        return sub(div(_diff(u, v), w), div(mul(u, _diff(w, v)), pow_(w, Num(2.0))))
    if isinstance(e, Pow):
        u, w = e.base, e.exponent
        du = _diff(u, v)
        if _is_num(w):
            # power rule: w * u^(w-1) * u'
            return mul(mul(w, pow_(u, Num(w.value - 1.0))), du)
        dw = _diff(w, v)
        # u^w * (w' log u + w u'/u)
        return mul(pow_(u, w), add(mul(dw, call("log", u)), mul(w, div(du, u))))
    if isinstance(e, Call):
        inner = _diff(e.arg, v)
        a = e.arg
        outer = {
            "exp": lambda: call("exp", a),
            "log": lambda: div(ONE, a),
            "sin": lambda: call("cos", a),
            "cos": lambda: neg(call("sin", a)),
            "tan": lambda: div(ONE, pow_(call("cos", a), Num(2.0))),
            "sinh": lambda: call("cosh", a),
            "cosh": lambda: call("sinh", a),
            "sqrt": lambda: div(ONE, mul(Num(2.0), call("sqrt", a))),
            "abs": lambda: div(a, call("abs", a)),
        }[e.fn]()
        return mul(outer, inner)
    raise TypeError(f"not an Expr node: {e!r}")


# ---------------------------------------------------------------------------
# Printing

_PREC = {"add": 1, "mul": 2, "unary": 3, "pow": 4, "atom": 5}


def to_text(expr):
    """Render an AST back to parseable text; parse(to_text(e)) == e."""
    return _print(expr, 0)


def _print(e, parent_prec):
    if isinstance(e, Num):
        if e.value < 0.0 or (e.value == 0.0 and np.signbit(e.value)):
            text, prec = f"-{_fmt_num(-e.value)}", _PREC["unary"]
        else:
            text, prec = _fmt_num(e.value), _PREC["atom"]
    elif isinstance(e, Var):
        text, prec = e.name, _PREC["atom"]
    elif isinstance(e, Neg):
        text, prec = f"-{_print(e.arg, _PREC['unary'])}", _PREC["unary"]
    elif isinstance(e, Add):
        text = f"{_print(e.left, _PREC['add'])} + {_print(e.right, _PREC['add'] + 1)}"
        prec = _PREC["add"]
    elif isinstance(e, Sub):
        text = f"{_print(e.left, _PREC['add'])} - {_print(e.right, _PREC['add'] + 1)}"
        prec = _PREC["add"]
    elif isinstance(e, Mul):
        text = f"{_print(e.left, _PREC['mul'])}*{_print(e.right, _PREC['mul'] + 1)}"
        prec = _PREC["mul"]
    elif isinstance(e, Div):
        text = f"{_print(e.left, _PREC['mul'])}/{_print(e.right, _PREC['mul'] + 1)}"
        prec = _PREC["mul"]
    elif isinstance(e, Pow):
        # right-associative: parenthesize a Pow base, not a Pow exponent
        text = f"{_print(e.base, _PREC['pow'] + 1)}^{_print(e.exponent, _PREC['pow'])}"
        prec = _PREC["pow"]
    elif isinstance(e, Call):
        text, prec = f"{e.fn}({_print(e.arg, 0)})", _PREC["atom"]
    else:
        raise TypeError(f"not an Expr node: {e!r}")
    if prec < parent_prec:
        return f"({text})"
    return text


def _fmt_num(v):
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def free_variables(expr):
    """Set of variable names appearing in the tree."""
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, (Num,)):
        return set()
    if isinstance(expr, Neg):
        return free_variables(expr.arg)
    if isinstance(expr, Call):
        return free_variables(expr.arg)
    if isinstance(expr, (Add, Sub, Mul, Div)):
        return free_variables(expr.left) | free_variables(expr.right)
    if isinstance(expr, Pow):
        return free_variables(expr.base) | free_variables(expr.exponent)
    raise TypeError(f"not an Expr node: {expr!r}")
