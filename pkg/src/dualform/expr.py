"""Expression trees for parametrized maps, with a small parser.

Grammar::

    patch  := "(" expr { "," expr } ")"
    expr   := term { ("+" | "-") term }
    term   := factor { ("*" | "/") factor }
    factor := ["-"] atom ["^" integer]
    atom   := number | ident | func "(" expr ")" | "(" expr ")"
    func   := sin | cos | sinh | cosh | sqrt

``pi`` is accepted as a named constant. A leading minus directly on a
number is folded into the constant, so printing and re-parsing a parsed
tree gives back an identical tree.

Trees evaluate over floats, numpy arrays, or :class:`~dualform.taylor.Taylor`
values, the latter giving forward-mode derivatives.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

FUNCTIONS = ("sin", "cos", "sinh", "cosh", "sqrt")
CONSTANTS = {"pi": math.pi}


class ParseError(ValueError):
    def __init__(self, message, line, column):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class EvaluationError(ArithmeticError):
    pass


class Expr:
    __slots__ = ()

    def evaluate(self, env, _memo=None):
        """Evaluate with ``env`` mapping parameter names to values."""
        memo = {} if _memo is None else _memo
        key = id(self)
        if key not in memo:
            memo[key] = self._eval(env, memo)
        return memo[key]

    def __str__(self):
        return to_text(self)

    def variables(self):
        out = []
        _collect_vars(self, out)
        return out


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float

    def _eval(self, env, memo):
        return self.value


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str

    def _eval(self, env, memo):
        try:
            return env[self.name]
        except KeyError:
            raise EvaluationError(f"no value bound for parameter {self.name!r}") from None


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr

    def _eval(self, env, memo):
        return -self.arg.evaluate(env, memo)


@dataclass(frozen=True, eq=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def _eval(self, env, memo):
        a = self.left.evaluate(env, memo)
        b = self.right.evaluate(env, memo)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            den = _plain(b)
            if np.any(np.asarray(den) == 0):
                raise EvaluationError(f"division by zero in {to_text(self.right)}")
            return a / b
        raise ValueError(f"unknown operator {self.op!r}")


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: int

    def _eval(self, env, memo):
        b = self.base.evaluate(env, memo)
        if self.exponent < 0 and np.any(np.asarray(_plain(b)) == 0):
            raise EvaluationError("zero raised to a negative power")
        return b ** self.exponent


@dataclass(frozen=True, eq=True)
class Func(Expr):
    name: str
    arg: Expr

    def _eval(self, env, memo):
        x = self.arg.evaluate(env, memo)
        if hasattr(x, "coeffs"):  # Taylor value
            if self.name == "sqrt" and np.any(x.value <= 0):
                raise EvaluationError("sqrt of a non-positive value under differentiation")
            return getattr(x, self.name)()
        if self.name == "sqrt":
            if np.any(np.asarray(x) < 0):
                raise EvaluationError("sqrt of a negative value")
            return np.sqrt(x)
        return getattr(np, self.name)(x)


def _plain(x):
    return x.value if hasattr(x, "coeffs") else x


def _collect_vars(e, out):
    if isinstance(e, Var):
        if e.name not in out:
            out.append(e.name)
    elif isinstance(e, (Neg, Func)):
        _collect_vars(e.arg, out)
    elif isinstance(e, Pow):
        _collect_vars(e.base, out)
    elif isinstance(e, BinOp):
        _collect_vars(e.left, out)
        _collect_vars(e.right, out)


# ---------------------------------------------------------------------------
# construction helpers with light simplification

def _is_const(e, value=None):
    return isinstance(e, Const) and (value is None or e.value == value)


def add(a, b):
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    return BinOp("+", a, b)


def sub(a, b):
    if _is_const(b, 0):
        return a
    if _is_const(a, 0):
        return neg(b)
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    return BinOp("-", a, b)


def mul(a, b):
    if _is_const(a, 0) or _is_const(b, 0):
        return Const(0.0)
    if _is_const(a, 1):
        return b
    if _is_const(b, 1):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    return BinOp("*", a, b)


def div(a, b):
    if _is_const(b, 1):
        return a
    if _is_const(a, 0):
        return Const(0.0)
    return BinOp("/", a, b)


def neg(a):
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(a, n):
    if n == 1:
        return a
    if n == 0:
        return Const(1.0)
    return Pow(a, n)


def differentiate(e: Expr, var: str) -> Expr:
    """Symbolic partial derivative of ``e`` with respect to ``var``."""
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0 if e.name == var else 0.0)
    if isinstance(e, Neg):
        return neg(differentiate(e.arg, var))
    if isinstance(e, BinOp):
        da = differentiate(e.left, var)
        db = differentiate(e.right, var)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, e.right), mul(e.left, db))
        if e.op == "/":
            num = sub(mul(da, e.right), mul(e.left, db))
            return div(num, power(e.right, 2))
    if isinstance(e, Pow):
        db = differentiate(e.base, var)
        return mul(mul(Const(float(e.exponent)), power(e.base, e.exponent - 1)), db)
    if isinstance(e, Func):
        da = differentiate(e.arg, var)
        x = e.arg
        outer = {
            "sin": lambda: Func("cos", x),
            "cos": lambda: neg(Func("sin", x)),
            "sinh": lambda: Func("cosh", x),
            "cosh": lambda: Func("sinh", x),
            "sqrt": lambda: div(Const(0.5), Func("sqrt", x)),
        }[e.name]()
        return mul(outer, da)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _fmt_number(v):
    v = float(v)
    if v.is_integer() and abs(v) < 1e15 and not (v == 0 and math.copysign(1.0, v) < 0):
        return str(int(v))
    return repr(v)


def _atom_text(e):
    """Text usable where the grammar wants an atom."""
    if isinstance(e, (Const, Var, Func)):
        return to_text(e)
    return f"({to_text(e)})"


def to_text(e: Expr) -> str:
    if isinstance(e, Const):
        s = _fmt_number(e.value)
        return f"({s})" if s.startswith("-") else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({to_text(e.arg)})"
    if isinstance(e, Pow):
        return f"{_atom_text(e.base)}^{e.exponent}"
    if isinstance(e, Neg):
        a = e.arg
        if isinstance(a, Pow) or (isinstance(a, (Var, Func))):
            return f"-{to_text(a)}"
        return f"-({to_text(a)})"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        left = to_text(e.left)
        if isinstance(e.left, BinOp) and _PREC[e.left.op] < p:
            left = f"({left})"
        right = to_text(e.right)
        if isinstance(e.right, BinOp) and _PREC[e.right.op] <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression: {e!r}")


def patch_text(exprs) -> str:
    return "(" + ", ".join(to_text(e) for e in exprs) + ")"


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),−×])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text):
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            s = {"−": "-", "×": "*"}.get(s, s)
            toks.append(_Tok(kind, s, line, pos - line_start + 1))
        for k, ch in enumerate(s if kind == "ws" else ""):
            if ch == "\n":
                line += 1
                line_start = pos + k + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text, params):
        self.toks = _tokenize(text)
        self.i = 0
        self.params = None if params is None else list(params)
        self.seen = []

    @property
    def tok(self):
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        where = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(f"{msg} at {where}", tok.line, tok.col)

    def accept(self, text):
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text, msg):
        if not self.accept(text):
            self.error(msg)

    def patch(self):
        self.expect("(", "expected '(' to open the patch")
        exprs = [self.expr()]
        while self.accept(","):
            exprs.append(self.expr())
        if self.tok.kind == "eof":
            self.error("unbalanced parenthesis: expected ')'")
        self.expect(")", "expected ',' or ')'")
        if self.tok.kind != "eof":
            self.error("trailing input after patch")
        return exprs

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        negate = self.accept("-")
        node = self.atom()
        if self.accept("^"):
            sign = -1 if self.accept("-") else 1
            tok = self.tok
            if tok.kind != "num" or not tok.text.isdigit():
                self.error("expected an integer exponent")
            self.i += 1
            node = Pow(node, sign * int(tok.text))
        if negate:
            node = Const(-node.value) if isinstance(node, Const) else Neg(node)
        return node

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Const(float(tok.text))
        if tok.kind == "ident":
            self.i += 1
            if tok.text in FUNCTIONS:
                self.expect("(", f"expected '(' after {tok.text}")
                arg = self.expr()
                if self.tok.kind == "op" and self.tok.text == ",":
                    self.error(f"arity mismatch: {tok.text} takes one argument")
                if self.tok.kind == "eof":
                    self.error("unbalanced parenthesis: expected ')'")
                self.expect(")", "expected ')'")
                return Func(tok.text, arg)
            if self.tok.kind == "op" and self.tok.text == "(":
                self.error(f"unknown function {tok.text!r}", tok)
            if tok.text in CONSTANTS and (self.params is None or tok.text not in self.params):
                return Const(CONSTANTS[tok.text])
            if self.params is not None and tok.text not in self.params:
                self.error(f"unknown identifier {tok.text!r}", tok)
            if tok.text not in self.seen:
                self.seen.append(tok.text)
            return Var(tok.text)
        if self.accept("("):
            node = self.expr()
            if self.tok.kind == "eof":
                self.error("unbalanced parenthesis: expected ')'")
            self.expect(")", "expected ')'")
            return node
        self.error("expected a number, identifier or '('")


def parse(text: str, params=None):
    """Parse a patch ``"(e1, e2, ...)"``.

    Returns ``(exprs, params)``. When ``params`` is not given, parameters
    are the identifiers in order of first appearance.
    """
    p = _Parser(text, params)
    exprs = p.patch()
    return exprs, (list(params) if params is not None else p.seen)


def parse_expr(text: str, params=None) -> Expr:
    p = _Parser(text, params)
    node = p.expr()
    if p.tok.kind != "eof":
        p.error("trailing input")
    return node
