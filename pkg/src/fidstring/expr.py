"""Scalar math expressions: a small Pratt parser plus plain and dual-number evaluation.

Curves, reparameterizations and condition functions arrive as text, e.g.
``"t^3"`` or ``"theta2 - theta1^2"``.  Evaluation accepts floats or numpy
arrays as bindings, so the same tree serves scalar calls and vectorized
quadrature.  Derivatives come from forward-mode dual numbers seeded in one
variable.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import (
    DomainError,
    ParseError,
    UnboundVariableError,
    UnknownFunctionError,
    UnknownVariableError,
)

__all__ = [
    "Num", "Var", "Neg", "BinOp", "Call", "Dual", "Expression",
    "FUNCTIONS", "parse", "as_expression",
]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "abs")


# --------------------------------------------------------------------- AST

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Call]


# --------------------------------------------------------------- tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "num" | "name" | "op" | "eof"
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", pos, source)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("eof", "", len(source)))
    return tokens


# ------------------------------------------------------------------ parser

# binding powers; ^ binds tighter than unary minus, which binds tighter than * /
_INFIX_BP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_RIGHT_ASSOC = {"^"}
_PREFIX_MINUS_BP = 30


class _Parser:
    def __init__(self, source: str, allowed_vars: Sequence[str]):
        self.source = source
        self.allowed = set(allowed_vars)
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.next()
        if tok.text != text or tok.kind == "eof":
            what = "end of input" if tok.kind == "eof" else repr(tok.text)
            raise ParseError(f"expected {text!r}, found {what}", tok.pos, self.source)
        return tok

    def parse(self) -> Node:
        node = self.expression(0)
        tok = self.peek()
        if tok.kind != "eof":
            raise ParseError(f"unexpected token {tok.text!r}", tok.pos, self.source)
        return node

    def expression(self, rbp: int) -> Node:
        left = self.nud(self.next())
        while True:
            tok = self.peek()
            bp = _INFIX_BP.get(tok.text) if tok.kind == "op" else None
            if bp is None:
                if tok.kind in ("num", "name") or tok.text == "(":
                    raise ParseError(
                        f"unexpected token {tok.text!r} (implicit multiplication is not allowed)",
                        tok.pos, self.source)
                return left
            if bp <= rbp:
                return left
            self.next()
            right = self.expression(bp - 1 if tok.text in _RIGHT_ASSOC else bp)
            left = BinOp(tok.text, left, right)

    def nud(self, tok: _Token) -> Node:
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "name":
            if self.peek().text == "(":
                if tok.text not in FUNCTIONS:
                    raise UnknownFunctionError(f"unknown function {tok.text!r}", tok.pos, self.source)
                self.next()
                arg = self.expression(0)
                self.expect(")")
                return Call(tok.text, arg)
            if tok.text in FUNCTIONS:
                raise ParseError(f"expected '(' after function {tok.text!r}", self.peek().pos, self.source)
            if tok.text not in self.allowed:
                raise UnknownVariableError(f"unknown variable {tok.text!r}", tok.pos, self.source)
            return Var(tok.text)
        if tok.text == "-":
            return Neg(self.expression(_PREFIX_MINUS_BP))
        if tok.text == "(":
            inner = self.expression(0)
            self.expect(")")
            return inner
        if tok.kind == "eof":
            raise ParseError("unexpected end of input", tok.pos, self.source)
        raise ParseError(f"unexpected token {tok.text!r}", tok.pos, self.source)


def parse(source: str, allowed_vars: Sequence[str]) -> "Expression":
    """Parse ``source`` into an :class:`Expression` over ``allowed_vars``.

    Raises :class:`ParseError` (or its subclasses for unknown names) with the
    character offset of the offending token.
    """
    if not source or not source.strip():
        raise ParseError("empty expression", 0, source or "")
    if not allowed_vars:
        raise ValueError("allowed_vars must be non-empty")
    return Expression(_Parser(source, allowed_vars).parse(), source)


def as_expression(value: Union[str, "Expression"], allowed_vars: Sequence[str]) -> "Expression":
    if isinstance(value, Expression):
        extra = set(value.free_vars) - set(allowed_vars)
        if extra:
            raise UnknownVariableError(f"unknown variable {sorted(extra)[0]!r}", 0, str(value))
        return value
    return parse(value, allowed_vars)


# ------------------------------------------------------------ dual numbers

def _any(cond) -> bool:
    return bool(np.any(cond))


@dataclass(frozen=True)
class Dual:
    """First-order dual number ``value + deriv*eps``; fields may be numpy arrays."""

    value: object
    deriv: object = 0.0

    def __neg__(self) -> "Dual":
        return Dual(-self.value, -self.deriv)

    def __add__(self, other: "Dual") -> "Dual":
        return Dual(self.value + other.value, self.deriv + other.deriv)

    def __sub__(self, other: "Dual") -> "Dual":
        return Dual(self.value - other.value, self.deriv - other.deriv)

    def __mul__(self, other: "Dual") -> "Dual":
        return Dual(self.value * other.value,
                    self.deriv * other.value + self.value * other.deriv)

    def __truediv__(self, other: "Dual") -> "Dual":
        if _any(other.value == 0):
            raise DomainError("division by zero")
        return Dual(self.value / other.value,
                    (self.deriv * other.value - self.value * other.deriv) / (other.value * other.value))


def _int_exponent(node: Node):
    """Integer value of a literal exponent (``3`` or ``-2``), else None."""
    sign = 1.0
    if isinstance(node, Neg):
        sign, node = -1.0, node.operand
    if isinstance(node, Num) and float(node.value).is_integer():
        return sign * node.value
    return None


def _ipow(base, k: float):
    """base^k for integral k, exactly odd or even in base (np.power is not)."""
    out = np.power(np.abs(base), k)
    if k % 2 == 1:
        out = np.where(np.asarray(base) < 0, -out, out)
    return out


def _pow_value(base, expo, integer: bool):
    if integer:
        if expo < 0 and _any(base == 0):
            raise DomainError("zero raised to a negative power")
        return _ipow(base, expo)
    if _any(base < 0):
        raise DomainError("non-integer power of a negative base")
    if _any((base == 0) & (expo <= 0)):
        raise DomainError("zero raised to a non-positive power")
    return np.power(base, expo)


def _pow_dual(base: Dual, expo: Dual, integer: bool) -> Dual:
    a, da, b, db = base.value, base.deriv, expo.value, expo.deriv
    value = _pow_value(a, b, integer)
    if integer:
        if b == 0:
            return Dual(value, 0.0 * da)
        return Dual(value, b * _ipow(a, b - 1.0) * da)
    if _any((a == 0) & (b < 1) & (da != 0)):
        raise DomainError("derivative of a fractional power at zero")
    if _any((a == 0) & (db != 0)):
        raise DomainError("logarithm of zero in a variable exponent")
    safe = np.where(a == 0, 1.0, a)
    term1 = np.where(da == 0, 0.0, b * np.power(safe, b - 1.0) * da)
    term1 = np.where((a == 0) & (da != 0), np.where(b == 1, da, 0.0), term1)
    term2 = np.where(db == 0, 0.0, value * np.log(safe) * db)
    return Dual(value, term1 + term2)


def _check_log(a):
    if _any(a <= 0):
        raise DomainError("log of a non-positive number")


def _check_sqrt(a):
    if _any(a < 0):
        raise DomainError("sqrt of a negative number")


def _fn_value(name: str, a):
    if name == "sin":
        return np.sin(a)
    if name == "cos":
        return np.cos(a)
    if name == "exp":
        return np.exp(a)
    if name == "log":
        _check_log(a)
        return np.log(a)
    if name == "sqrt":
        _check_sqrt(a)
        return np.sqrt(a)
    if name == "abs":
        return np.abs(a)
    raise UnknownFunctionError(f"unknown function {name!r}", 0)


def _fn_dual(name: str, x: Dual) -> Dual:
    a, da = x.value, x.deriv
    if name == "sin":
        return Dual(np.sin(a), np.cos(a) * da)
    if name == "cos":
        return Dual(np.cos(a), -np.sin(a) * da)
    if name == "exp":
        e = np.exp(a)
        return Dual(e, e * da)
    if name == "log":
        _check_log(a)
        return Dual(np.log(a), da / a)
    if name == "sqrt":
        _check_sqrt(a)
        r = np.sqrt(a)
        if _any((r == 0) & (da != 0)):
            raise DomainError("derivative of sqrt at zero")
        return Dual(r, np.where(da == 0, 0.0, da / (2.0 * np.where(r == 0, 1.0, r))))
    if name == "abs":
        # one-sided convention: d|u|/du at 0 is 0
        return Dual(np.abs(a), np.sign(a) * da)
    raise UnknownFunctionError(f"unknown function {name!r}", 0)


def _lookup(env: Mapping, name: str):
    try:
        return env[name]
    except KeyError:
        raise UnboundVariableError(name) from None


def _eval(node: Node, env: Mapping):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return _lookup(env, node.name)
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        left = _eval(node.left, env)
        op = node.op
        if op == "^":
            k = _int_exponent(node.right)
            if k is not None:
                return _pow_value(left, k, True)
            return _pow_value(left, _eval(node.right, env), False)
        right = _eval(node.right, env)
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if _any(right == 0):
            raise DomainError("division by zero")
        return left / right
    return _fn_value(node.func, _eval(node.arg, env))


def _eval_dual(node: Node, env: Mapping) -> Dual:
    if isinstance(node, Num):
        return Dual(node.value, 0.0)
    if isinstance(node, Var):
        return _lookup(env, node.name)
    if isinstance(node, Neg):
        return -_eval_dual(node.operand, env)
    if isinstance(node, BinOp):
        left = _eval_dual(node.left, env)
        op = node.op
        if op == "^":
            k = _int_exponent(node.right)
            if k is not None:
                return _pow_dual(left, Dual(k, 0.0), True)
            return _pow_dual(left, _eval_dual(node.right, env), False)
        right = _eval_dual(node.right, env)
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        return left / right
    return _fn_dual(node.func, _eval_dual(node.arg, env))


def _finish(result, shape):
    result = np.asarray(result, dtype=float)
    if np.isnan(result).any():
        raise DomainError("evaluation produced NaN")
    if shape:
        return np.broadcast_to(result, shape).copy()
    return float(result)


# -------------------------------------------------------------- printing

def _format(node: Node) -> str:
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_format(node.operand)})"
    if isinstance(node, BinOp):
        return f"({_format(node.left)} {node.op} {_format(node.right)})"
    return f"{node.func}({_format(node.arg)})"


def _collect_vars(node: Node, out: dict) -> None:
    if isinstance(node, Var):
        out.setdefault(node.name, None)
    elif isinstance(node, Neg):
        _collect_vars(node.operand, out)
    elif isinstance(node, BinOp):
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)
    elif isinstance(node, Call):
        _collect_vars(node.arg, out)


def _substitute(node: Node, name: str, replacement: Node) -> Node:
    if isinstance(node, Var):
        return replacement if node.name == name else node
    if isinstance(node, Neg):
        return Neg(_substitute(node.operand, name, replacement))
    if isinstance(node, BinOp):
        return BinOp(node.op, _substitute(node.left, name, replacement),
                     _substitute(node.right, name, replacement))
    if isinstance(node, Call):
        return Call(node.func, _substitute(node.arg, name, replacement))
    return node


# ------------------------------------------------------------- Expression

@dataclass(frozen=True)
class Expression:
    """Parsed expression tree.  Immutable; equality compares trees only."""

    root: Node
    source: str = field(default="", compare=False)
    free_vars: tuple = field(init=False, compare=False)

    def __post_init__(self):
        names: dict = {}
        _collect_vars(self.root, names)
        object.__setattr__(self, "free_vars", tuple(names))
        if not self.source:
            object.__setattr__(self, "source", _format(self.root))

    def __str__(self) -> str:
        return _format(self.root)

    def eval(self, bindings: Mapping | None = None, **kwargs):
        """Evaluate with real (or array) bindings.

        Returns a float for scalar bindings, an array (broadcast over all
        bound arrays) otherwise.  Domain violations raise
        :class:`DomainError`.
        """
        env = dict(bindings or {}, **kwargs)
        shape = np.broadcast_shapes(*(np.shape(v) for v in env.values())) if env else ()
        with np.errstate(all="ignore"):
            return _finish(_eval(self.root, env), shape)

    def eval_dual(self, bindings: Mapping, seed: str):
        """Value and partial derivative with respect to ``seed``.

        Returns ``(value, deriv)``.  A seed the expression does not depend
        on yields a zero derivative.
        """
        if seed not in bindings:
            raise UnboundVariableError(seed)
        env = {name: Dual(v, 1.0 if name == seed else 0.0) for name, v in bindings.items()}
        shape = np.broadcast_shapes(*(np.shape(v) for v in bindings.values()))
        with np.errstate(all="ignore"):
            out = _eval_dual(self.root, env)
            return _finish(out.value, shape), _finish(out.deriv, shape)

    def substitute(self, name: str, replacement: "Expression") -> "Expression":
        """Replace every occurrence of variable ``name`` by ``replacement``."""
        return Expression(_substitute(self.root, name, replacement.root))
