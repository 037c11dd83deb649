"""A small arithmetic expression language for inline problem definitions.

Grammar (apart from whitespace, which is ignored):

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := number | 'x' | 'y' | 't' | 'pi'
            | func '(' expr (',' expr)* ')'
            | '(' expr ')'
    func   := 'sin' | 'cos' | 'exp' | 'ln' | 'min' | 'max'

'^' is right associative and binds tighter than unary minus, so -x^2 is
-(x^2).  min and max take two or more arguments and act elementwise.
Numbers accept scientific notation.  Evaluation is vectorised: x, y, t may
be numpy arrays and broadcast as usual.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["ExpressionError", "Expression", "parse_expression"]

_TOKEN = re.compile(r"""
    (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
  | (?P<ws>\s+)
""", re.VERBOSE)

_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "ln": np.log,
}
_REDUCERS = {
    "min": np.minimum,
    "max": np.maximum,
}
_CONSTANTS = {"pi": np.pi}
_VARIABLES = ("x", "y", "t")


class ExpressionError(ValueError):
    """Parse or evaluation failure, with the offending position."""

    def __init__(self, message: str, src: str, pos: int):
        marker = " " * pos + "^"
        super().__init__(f"{message}\n  {src}\n  {marker}")
        self.pos = pos


@dataclass
class _Token:
    kind: str       # num | name | op | end
    text: str
    pos: int


def _tokenize(src: str) -> list:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ExpressionError(f"unexpected character {src[pos]!r}", src, pos)
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(src)))
    return tokens


class Expression:
    """A compiled expression; call with arrays (or scalars) for x, y, t."""

    def __init__(self, src: str, fn: Callable, variables: frozenset):
        self.src = src
        self._fn = fn
        self.variables = variables

    def __call__(self, x=None, y=None, t=None):
        return self._fn({"x": x, "y": y, "t": t})

    def evaluate(self, points: np.ndarray, t) -> np.ndarray:
        """Evaluate over (n, dim) points at time t, always returning (n,)."""
        points = np.asarray(points, dtype=float)
        pts = points.reshape(-1, points.shape[-1]) if points.ndim > 1 \
            else points.reshape(-1, 1)
        env = {"x": pts[:, 0], "y": pts[:, 1] if pts.shape[1] > 1 else None, "t": t}
        out = np.asarray(self._fn(env), dtype=float)
        if out.ndim == 0:
            out = np.full(len(pts), float(out))
        return np.broadcast_to(out, (len(pts),)).copy() if out.shape != (len(pts),) \
            else out

    def __repr__(self):
        return f"Expression({self.src!r})"


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0
        self.variables = set()

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def take(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, text: str) -> None:
        tok = self.take()
        if tok.kind != "op" or tok.text != text:
            raise ExpressionError(f"expected {text!r}", self.src, tok.pos)

    def parse(self) -> Callable:
        fn = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionError(f"unexpected {tok.text!r}", self.src, tok.pos)
        return fn

    def expr(self) -> Callable:
        fn = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.take().text
            rhs = self.term()
            if op == "+":
                fn = (lambda a, b: lambda env: a(env) + b(env))(fn, rhs)
            else:
                fn = (lambda a, b: lambda env: a(env) - b(env))(fn, rhs)
        return fn

    def term(self) -> Callable:
        fn = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.take().text
            rhs = self.unary()
            if op == "*":
                fn = (lambda a, b: lambda env: a(env) * b(env))(fn, rhs)
            else:
                fn = (lambda a, b: lambda env: a(env) / b(env))(fn, rhs)
        return fn

    def unary(self) -> Callable:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.take()
            inner = self.unary()
            return (lambda a: lambda env: -a(env))(inner)
        return self.power()

    def power(self) -> Callable:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.take()
            expo = self.unary()
            return (lambda a, b: lambda env: np.power(a(env), b(env)))(base, expo)
        return base

    def atom(self) -> Callable:
        tok = self.take()
        if tok.kind == "num":
            val = float(tok.text)
            return lambda env: val
        if tok.kind == "op" and tok.text == "(":
            fn = self.expr()
            self.expect_op(")")
            return fn
        if tok.kind == "name":
            name = tok.text
            if self.peek().kind == "op" and self.peek().text == "(":
                return self.call(name, tok.pos)
            if name in _VARIABLES:
                self.variables.add(name)

                def var(env, _n=name, _p=tok.pos, _s=self.src):
                    v = env.get(_n)
                    if v is None:
                        raise ExpressionError(f"variable {_n!r} has no value here",
                                              _s, _p)
                    return v
                return var
            if name in _CONSTANTS:
                val = _CONSTANTS[name]
                return lambda env: val
            raise ExpressionError(
                f"unknown name {name!r} (variables: x, y, t; constant: pi)",
                self.src, tok.pos)
        raise ExpressionError(f"unexpected {tok.text or 'end of input'!r}",
                              self.src, tok.pos)

    def call(self, name: str, pos: int) -> Callable:
        self.expect_op("(")
        args = [self.expr()]
        while self.peek().kind == "op" and self.peek().text == ",":
            self.take()
            args.append(self.expr())
        self.expect_op(")")
        if name in _FUNCS:
            if len(args) != 1:
                raise ExpressionError(f"{name} takes exactly one argument",
                                      self.src, pos)
            f = _FUNCS[name]
            a = args[0]
            return lambda env: f(a(env))
        if name in _REDUCERS:
            if len(args) < 2:
                raise ExpressionError(f"{name} takes at least two arguments",
                                      self.src, pos)
            f = _REDUCERS[name]

            def reduced(env, _args=tuple(args), _f=f):
                out = _args[0](env)
                for g in _args[1:]:
                    out = _f(out, g(env))
                return out
            return reduced
        raise ExpressionError(
            f"unknown function {name!r} (have: sin, cos, exp, ln, min, max)",
            self.src, pos)


def parse_expression(src: str) -> Expression:
    """Compile the source string; raises ExpressionError with a position."""
    if not src or not src.strip():
        raise ExpressionError("empty expression", src, 0)
    parser = _Parser(src)
    fn = parser.parse()
    return Expression(src, fn, frozenset(parser.variables))
