"""Expression language for user-supplied integrands over ``t``, ``x`` and ``d``.

Grammar (``^`` binds tightest and is right-associative; unary minus sits
between ``^`` and ``* /``, so ``-t^2`` is ``-(t^2)``)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := primary ("^" unary)?
    primary := NUMBER | VAR | FUNC "(" expr ("," expr)* ")" | "(" expr ")"
    NUMBER  := digits ["." digits] [("e" | "E") ["+" | "-"] digits]
             | "." digits [exponent]
    VAR     := "t" | "x" | "d"
    FUNC    := "gamma" | "pow" | "sqrt" | "abs" | "sin" | "cos" | "exp" | "ln"

There is no implicit multiplication: ``2t`` is a syntax error.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .glcore import AlphaLike, GammaPoleError, gamma
from .problem import IsoperimetricConstraint, VariationalProblem

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "EvalError",
    "parse",
    "evaluate",
    "to_source",
    "free_variables",
    "to_problem",
    "to_constraint",
    "to_exact",
]

VARIABLES = ("t", "x", "d")
MAX_DEPTH = 64
MAX_TREE_DEPTH = 160


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r}", offset)
        self.name = name


class EvalError(ExprError):
    """Evaluation left the domain of a subexpression."""

    def __init__(self, message: str, node: "Expr"):
        super().__init__(f"{message} in '{to_source(node)}'")
        self.node = node


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
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]


Expr = Union[Num, Var, Neg, BinOp, Call]


def _gamma_array(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    flat_in, flat_out = z.reshape(-1), out.reshape(-1)
    for k, v in enumerate(flat_in):
        try:
            flat_out[k] = gamma(v)
        except (GammaPoleError, OverflowError, ValueError):
            flat_out[k] = np.nan
    return out if out.ndim else float(out)


_FUNCS = {
    "gamma": (1, _gamma_array),
    "pow": (2, np.power),
    "sqrt": (1, np.sqrt),
    "abs": (1, np.abs),
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "exp": (1, np.exp),
    "ln": (1, np.log),
}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:[0-9]+(?:\.[0-9]+)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(source):
            m = _TOKEN.match(source, pos)
            if m is None:
                raise ExprSyntaxError(f"unexpected character {source[pos]!r}", self._offset(pos))
            kind = m.lastgroup
            if kind != "ws":
                self.tokens.append((kind, m.group(), pos))
            pos = m.end()
        self.tokens.append(("end", "", len(source)))
        self.i = 0
        self.depth = 0

    def _offset(self, pos: int) -> int:
        return len(self.source[:pos].encode("utf-8", "surrogatepass"))

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, expected: str):
        kind, text, pos = self.peek()
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"expected {expected}, found {found}", self._offset(pos))

    def expect(self, text: str):
        if self.peek()[1] != text or self.peek()[0] != "op":
            self.fail(repr(text))
        self.advance()

    def enter(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ExprSyntaxError("expression nested too deeply", self._offset(self.peek()[2]))

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail("operator or end of input")
        if _tree_depth(e) > MAX_TREE_DEPTH:
            raise ExprSyntaxError("expression nested too deeply", 0)
        return e

    def expr(self) -> Expr:
        self.enter()
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            left = BinOp(op, left, self.term())
        self.depth -= 1
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            self.enter()
            node = Neg(self.unary())
            self.depth -= 1
            return node
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.peek()[:2] == ("op", "^"):
            self.advance()
            self.enter()
            exponent = self.unary()
            self.depth -= 1
            return BinOp("^", base, exponent)
        return base

    def primary(self) -> Expr:
        kind, text, pos = self.peek()
        if kind == "num":
            self.advance()
            value = float(text)
            if not np.isfinite(value):
                raise ExprSyntaxError(f"numeric literal {text!r} out of range", self._offset(pos))
            return Num(value)
        if kind == "ident":
            self.advance()
            if text in VARIABLES:
                return Var(text)
            if text not in _FUNCS:
                raise UnknownIdentifierError(text, self._offset(pos))
            arity = _FUNCS[text][0]
            self.expect("(")
            args = [self.expr()]
            while self.peek()[:2] == ("op", ","):
                self.advance()
                args.append(self.expr())
            self.expect(")")
            if len(args) != arity:
                raise ExprSyntaxError(
                    f"{text} takes {arity} argument(s), got {len(args)}", self._offset(pos)
                )
            return Call(text, tuple(args))
        if (kind, text) == ("op", "("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        self.fail("number, variable, function or '('")


def _children(e: Expr) -> tuple:
    if isinstance(e, Neg):
        return (e.operand,)
    if isinstance(e, BinOp):
        return (e.left, e.right)
    if isinstance(e, Call):
        return e.args
    return ()


def _tree_depth(e: Expr) -> int:
    deepest = 0
    stack = [(e, 1)]
    while stack:
        node, depth = stack.pop()
        deepest = max(deepest, depth)
        stack.extend((c, depth + 1) for c in _children(node))
    return deepest


def parse(source: Union[str, bytes]) -> Expr:
    """Parse an expression; errors carry the byte offset of the offending token."""
    if isinstance(source, (bytes, bytearray)):
        try:
            source = bytes(source).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ExprSyntaxError("invalid UTF-8", exc.start) from None
    return _Parser(source).parse()


def to_source(e: Expr) -> str:
    """Fully parenthesized text that parses back to the same tree."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_source(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(to_source(a) for a in e.args)})"
    raise TypeError(f"not an expression node: {e!r}")


def free_variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    return set().union(*(free_variables(c) for c in _children(e)))


def _checked(value, node: Expr, what: str):
    if not np.all(np.isfinite(value)):
        raise EvalError(what, node)
    return value


def _eval(e: Expr, env: dict):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Neg):
        return -_eval(e.operand, env)
    if isinstance(e, BinOp):
        left = _eval(e.left, env)
        right = _eval(e.right, env)
        if e.op == "+":
            return _checked(np.add(left, right), e, "overflow")
        if e.op == "-":
            return _checked(np.subtract(left, right), e, "overflow")
        if e.op == "*":
            return _checked(np.multiply(left, right), e, "overflow")
        if e.op == "/":
            if np.any(np.asarray(right) == 0):
                raise EvalError("division by zero", e)
            return _checked(np.divide(left, right), e, "overflow")
        return _checked(np.power(left, right), e, "power outside its domain")
    args = [_eval(a, env) for a in e.args]
    return _checked(_FUNCS[e.func][1](*args), e, f"{e.func} outside its domain")


def evaluate(e: Expr, t, x, d):
    """Evaluate at scalars or at equally shaped arrays (elementwise)."""
    env = {"t": np.asarray(t, float), "x": np.asarray(x, float), "d": np.asarray(d, float)}
    with np.errstate(all="ignore"):
        value = _eval(e, env)
    value = np.asarray(value, dtype=float)
    if value.ndim == 0 and all(env[k].ndim == 0 for k in env):
        return float(value)
    return np.broadcast_to(value, np.broadcast(*env.values()).shape).copy()


def _compile(e: Expr):
    return lambda t, x, d: evaluate(e, t, x, d)


def to_problem(
    L_source: str,
    alpha: AlphaLike,
    a: float,
    b: float,
    x_a: float,
    x_b: float,
) -> VariationalProblem:
    """Problem from a Lagrangian string; partials by central differences."""
    e = parse(L_source)
    return VariationalProblem.from_lagrangian(_compile(e), alpha, (a, b), (x_a, x_b), name=L_source)


def to_constraint(g_source: str, K: float) -> IsoperimetricConstraint:
    return IsoperimetricConstraint.from_integrand(_compile(parse(g_source)), K)


def to_exact(source: str):
    """Callable ``t -> x(t)`` from an expression in ``t`` alone."""
    e = parse(source)
    extra = free_variables(e) - {"t"}
    if extra:
        raise ExprError(f"exact solution may only depend on t, found {sorted(extra)}")
    return lambda t: evaluate(e, t, 0.0, 0.0)
