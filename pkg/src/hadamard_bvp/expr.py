"""Parser and evaluator for nonlinearity expressions f(t, x).

Problems are defined in config files, so the right-hand side is written in
a small expression language instead of code:

    grammar     precedence (loosest to tightest)
    ---------   ------------------------------------------
    a + b       addition, subtraction (left associative)
    a * b       multiplication, division (left associative)
    -a          unary minus (binds looser than ^)
    a ^ b       power (right associative)
    ln(a) exp(a) sqrt(a) abs(a)
    numbers     decimal literals, optional exponent (2, 0.5, 1e-3)
    t, x        the free variables
    names       anything else is a named parameter (e.g. lambda)

"-x^2" therefore means -(x^2) and "2^3^2" means 2^(3^2).  There is no
builtin constant e; write exp(1) or a literal.  Evaluation follows IEEE
doubles: division by zero and 0^negative give infinities (singular values
of f are legitimate near the endpoints), while NaN raises, carrying the
probe point that produced it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "ExprSyntaxError",
    "ExprEvalError",
    "Num",
    "Var",
    "Param",
    "Unary",
    "Binary",
    "ExprAst",
    "parse",
    "to_string",
    "eval_ast",
    "free_parameters",
    "as_function",
]

FUNCTIONS = ("ln", "exp", "sqrt", "abs")
VARIABLES = ("t", "x")


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class ExprEvalError(ValueError):
    def __init__(self, message: str, t=None, x=None):
        if t is not None:
            message = f"{message} at (t={t!r}, x={x!r})"
        super().__init__(message)
        self.t = t
        self.x = x


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # neg | ln | exp | sqrt | abs
    arg: "ExprAst"


@dataclass(frozen=True)
class Binary:
    op: str  # + | - | * | / | ^
    lhs: "ExprAst"
    rhs: "ExprAst"


ExprAst = Union[Num, Var, Param, Unary, Binary]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            stripped = src[pos:].lstrip()
            if not stripped:
                break
            raise ExprSyntaxError(
                f"unexpected character {src[len(src) - len(stripped)]!r}",
                len(src) - len(stripped),
            )
        if m.lastgroup is None:
            break
        tokens.append((m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup)))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    def _peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def _next(self):
        tok = self._peek()
        self.i += 1
        return tok

    def _fail(self, message: str):
        tok = self._peek()
        raise ExprSyntaxError(message, tok[2] if tok else len(self.src))

    def _expect_op(self, op: str):
        tok = self._peek()
        if tok is None or tok[0] != "op" or tok[1] != op:
            self._fail(f"expected {op!r}")
        self.i += 1

    def parse(self) -> ExprAst:
        node = self._sum()
        if self._peek() is not None:
            self._fail(f"unexpected {self._peek()[1]!r}")
        return node

    def _sum(self) -> ExprAst:
        node = self._product()
        while (tok := self._peek()) and tok[0] == "op" and tok[1] in "+-":
            self._next()
            node = Binary(tok[1], node, self._product())
        return node

    def _product(self) -> ExprAst:
        node = self._unary()
        while (tok := self._peek()) and tok[0] == "op" and tok[1] in "*/":
            self._next()
            node = Binary(tok[1], node, self._unary())
        return node

    def _unary(self) -> ExprAst:
        tok = self._peek()
        if tok and tok[0] == "op" and tok[1] == "-":
            self._next()
            return Unary("neg", self._unary())
        return self._power()

    def _power(self) -> ExprAst:
        base = self._atom()
        tok = self._peek()
        if tok and tok[0] == "op" and tok[1] == "^":
            self._next()
            return Binary("^", base, self._unary())
        return base

    def _atom(self) -> ExprAst:
        tok = self._peek()
        if tok is None:
            self._fail("expected a value")
        kind, text, pos = tok
        if kind == "num":
            self._next()
            return Num(float(text))
        if kind == "ident":
            self._next()
            nxt = self._peek()
            if nxt and nxt[0] == "op" and nxt[1] == "(":
                if text not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {text!r}", pos)
                self._next()
                arg = self._sum()
                self._expect_op(")")
                return Unary(text, arg)
            if text in VARIABLES:
                return Var(text)
            return Param(text)
        if kind == "op" and text == "(":
            self._next()
            node = self._sum()
            self._expect_op(")")
            return node
        self._fail(f"unexpected {text!r}")


def parse(src: str) -> ExprAst:
    """Parse an expression string; raises ExprSyntaxError with a position."""
    return _Parser(src).parse()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(node: ExprAst) -> int:
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary) and node.op == "neg":
        return _PREC["neg"]
    return 5


def to_string(node: ExprAst) -> str:
    """Render with minimal parentheses; reparsing yields an equal AST
    (for ASTs whose literals are non-negative, as parse produces)."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, (Var, Param)):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            inner = to_string(node.arg)
            if _prec(node.arg) < _PREC["neg"]:
                inner = f"({inner})"
            return f"-{inner}"
        return f"{node.op}({to_string(node.arg)})"
    lhs, rhs = to_string(node.lhs), to_string(node.rhs)
    if node.op == "^":
        if _prec(node.lhs) <= _PREC["^"]:
            lhs = f"({lhs})"
        if _prec(node.rhs) < _PREC["^"]:
            rhs = f"({rhs})"
    else:
        if _prec(node.lhs) < _PREC[node.op]:
            lhs = f"({lhs})"
        if _prec(node.rhs) <= _PREC[node.op]:
            rhs = f"({rhs})"
    return f"{lhs} {node.op} {rhs}" if node.op in "+-" else f"{lhs}{node.op}{rhs}"


def free_parameters(node: ExprAst) -> set[str]:
    if isinstance(node, Param):
        return {node.name}
    if isinstance(node, Unary):
        return free_parameters(node.arg)
    if isinstance(node, Binary):
        return free_parameters(node.lhs) | free_parameters(node.rhs)
    return set()


def _eval(node: ExprAst, t, x, params: dict):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return t if node.name == "t" else x
    if isinstance(node, Param):
        try:
            return params[node.name]
        except KeyError:
            raise ExprEvalError(f"unbound parameter {node.name!r}") from None
    if isinstance(node, Unary):
        v = _eval(node.arg, t, x, params)
        if node.op == "neg":
            return -v
        if node.op == "ln":
            return np.log(v)
        if node.op == "exp":
            return np.exp(v)
        if node.op == "sqrt":
            return np.sqrt(v)
        return np.abs(v)
    lv = _eval(node.lhs, t, x, params)
    rv = _eval(node.rhs, t, x, params)
    if node.op == "+":
        return lv + rv
    if node.op == "-":
        return lv - rv
    if node.op == "*":
        return lv * rv
    if node.op == "/":
        return np.divide(lv, rv)
    return np.power(lv, rv)


def eval_ast(node: ExprAst, t, x, params: dict | None = None):
    """Evaluate at scalar or array (t, x).

    Infinities pass through (f is expected to be singular at the interval
    endpoints and at x = 0); a NaN raises ExprEvalError with the probe
    point that produced it.
    """
    params = params or {}
    with np.errstate(all="ignore"):
        out = _eval(node, np.asarray(t, dtype=float), np.asarray(x, dtype=float), params)
    out = np.asarray(out, dtype=float)
    if np.any(np.isnan(out)):
        t_arr = np.broadcast_to(np.asarray(t, dtype=float), out.shape)
        x_arr = np.broadcast_to(np.asarray(x, dtype=float), out.shape)
        idx = np.argmax(np.isnan(out))
        raise ExprEvalError(
            "expression evaluated to NaN",
            float(t_arr.flat[idx]) if t_arr.size else None,
            float(x_arr.flat[idx]) if x_arr.size else None,
        )
    if out.ndim == 0:
        return float(out)
    return out


def as_function(node: ExprAst, params: dict | None = None):
    """Bind parameters and return f(t, x); unbound names fail fast."""
    params = dict(params or {})
    missing = free_parameters(node) - set(params)
    if missing:
        raise ExprEvalError(f"unbound parameters {sorted(missing)!r}")
    return lambda t, x: eval_ast(node, t, x, params)
