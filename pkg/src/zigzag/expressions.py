"""Tiny observable language for CLI use: x1..xd, th1..thd, + - * ^, cos, exp.

parse_observable compiles a string like "x1^2 - 0.5*cos(x2) + th1*x1" into a
vectorized callable g(X, TH) suitable for the estimators.  A hand-rolled
recursive-descent parser keeps this to a page and avoids eval() on user
input.  '^' is exponentiation and binds right to left; '-' is both binary
and unary; juxtaposition is not multiplication (write 2*x1, not 2x1).
"""

from __future__ import annotations

import re
from typing import Callable, List, Tuple

import numpy as np

__all__ = ["ExpressionError", "parse_observable"]


class ExpressionError(ValueError):
    """Raised for lexical or syntax errors, with the offending position."""


_TOKEN_RE = re.compile(r"""
    (?P<num>\d+(\.\d*)?([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*^()])
  | (?P<ws>\s+)
""", re.VERBOSE)

_FUNCTIONS = {"cos": np.cos, "exp": np.exp}


def _tokenize(text: str) -> List[Tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExpressionError(f"unexpected character {text[pos]!r} at position {pos}")
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, dim: int):
        self.text = text
        self.dim = dim
        self.tokens = _tokenize(text)
        self.k = 0

    def peek(self):
        return self.tokens[self.k]

    def advance(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.advance()
        if text != value:
            raise ExpressionError(
                f"expected {value!r} at position {pos}, found {text or 'end of input'!r}")

    def fail(self, what: str):
        kind, text, pos = self.peek()
        found = text or "end of input"
        raise ExpressionError(f"expected {what} at position {pos}, found {found!r}")

    # expr := term (('+'|'-') term)*
    def expr(self) -> Callable:
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.advance()[1]
            rhs = self.term()
            node = (lambda a, b: lambda X, TH: a(X, TH) + b(X, TH))(node, rhs) \
                if op == "+" else \
                (lambda a, b: lambda X, TH: a(X, TH) - b(X, TH))(node, rhs)
        return node

    # term := unary ('*' unary)*
    def term(self) -> Callable:
        node = self.unary()
        while self.peek()[1] == "*":
            self.advance()
            rhs = self.unary()
            node = (lambda a, b: lambda X, TH: a(X, TH) * b(X, TH))(node, rhs)
        return node

    # unary := '-' unary | power
    def unary(self) -> Callable:
        if self.peek()[1] == "-":
            self.advance()
            inner = self.unary()
            return lambda X, TH: -inner(X, TH)
        return self.power()

    # power := atom ('^' unary)?   (right associative, so 2^3^2 = 2^9)
    def power(self) -> Callable:
        base = self.atom()
        if self.peek()[1] == "^":
            self.advance()
            exponent = self.unary()
            return lambda X, TH: base(X, TH) ** exponent(X, TH)
        return base

    def atom(self) -> Callable:
        kind, text, pos = self.peek()
        if kind == "num":
            self.advance()
            val = float(text)
            return lambda X, TH: val
        if kind == "name":
            self.advance()
            if text in _FUNCTIONS:
                fn = _FUNCTIONS[text]
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return lambda X, TH: fn(inner(X, TH))
            m = re.fullmatch(r"(x|th)([0-9]+)", text)
            if m is None:
                raise ExpressionError(
                    f"unknown name {text!r} at position {pos}; expected x<k>, "
                    f"th<k>, cos or exp")
            idx = int(m.group(2))
            if not 1 <= idx <= self.dim:
                raise ExpressionError(
                    f"{text!r} at position {pos} is out of range for dimension {self.dim}")
            j = idx - 1
            if m.group(1) == "x":
                return lambda X, TH: np.asarray(X, dtype=float)[..., j]
            return lambda X, TH: np.asarray(TH, dtype=float)[..., j]
        if text == "(":
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        self.fail("a number, variable, function or '('")


def parse_observable(text: str, dim: int) -> Callable:
    """Compile an observable string to a vectorized g(X, TH) -> values.

    The result accepts single states ((d,) arrays, returning a scalar) and
    stacked batches ((n, d) arrays, returning (n,)).  The source string is
    kept on the closure as .source for manifests and error messages.
    """
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    parser = _Parser(text, dim)
    node = parser.expr()
    kind, tok, pos = parser.peek()
    if kind != "end":
        raise ExpressionError(f"unexpected {tok!r} at position {pos}")

    def g(X, TH):
        out = node(X, TH)
        return np.asarray(out, dtype=float) + np.zeros(np.shape(X)[:-1])

    g.source = text
    return g
