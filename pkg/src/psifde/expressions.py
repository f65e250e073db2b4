"""A tiny arithmetic expression language for problem configuration.

Right-hand sides, delays, histories and impulse maps are supplied in
config files as expressions over a fixed symbol set rather than as
arbitrary code.  Grammar (usual precedence, left associative):

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := '-' unary | atom
    atom  := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Symbols (availability depends on where the expression appears):

    t         current time
    u         current state u(t)
    ud        delayed state u(h(t))
    w         the implicit value (the fractional derivative at t)
    psi_w     (psi(t) - psi(0))**(1 - rho), the weighted-space factor
    exp_npsi  exp(-(psi(t) - psi(0)))

Functions: ``abs(x)`` and the rational saturation
``sat(x, c) = x / (c * (1 + x))``.  Evaluation uses numpy semantics, so
expressions broadcast over arrays and follow IEEE arithmetic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ConfigurationError

__all__ = ["Expression", "parse_expression"]

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
                    r"|\d+(?:[eE][+-]?\d+)?)|([A-Za-z_][A-Za-z_0-9]*)|(.))")

_FUNCTIONS = {"abs": 1, "sat": 2}


def _tokenize(source: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            break
        number, name, other = m.groups()
        if number is not None:
            tokens.append(("num", number))
        elif name is not None:
            tokens.append(("name", name))
        elif other.strip():
            if other not in "+-*/(),":
                raise ConfigurationError(
                    f"unexpected character {other!r} in expression {source!r}")
            tokens.append(("op", other))
        pos = m.end()
    tokens.append(("end", ""))
    return tokens


class _Parser:
    def __init__(self, source: str, allowed: frozenset[str]):
        self.source = source
        self.allowed = allowed
        self.tokens = _tokenize(source)
        self.pos = 0
        self.names: set[str] = set()

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str):
        kind, text = self.take()
        if kind != "op" or text != value:
            raise ConfigurationError(
                f"expected {value!r} in expression {self.source!r}, got {text!r}")

    def parse(self):
        node = self.expr()
        kind, text = self.take()
        if kind != "end":
            raise ConfigurationError(
                f"trailing input {text!r} in expression {self.source!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.take()
            rhs = self.term()
            node = ("add" if op == "+" else "sub", node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            _, op = self.take()
            rhs = self.unary()
            node = ("mul" if op == "*" else "div", node, rhs)
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return ("neg", self.unary())
        return self.atom()

    def atom(self):
        kind, text = self.take()
        if kind == "num":
            return ("num", float(text))
        if kind == "name":
            if self.peek() == ("op", "("):
                if text not in _FUNCTIONS:
                    raise ConfigurationError(
                        f"unknown function {text!r} in expression {self.source!r}; "
                        f"available: {sorted(_FUNCTIONS)}")
                self.take()
                args = [self.expr()]
                while self.peek() == ("op", ","):
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != _FUNCTIONS[text]:
                    raise ConfigurationError(
                        f"function {text!r} takes {_FUNCTIONS[text]} argument(s), "
                        f"got {len(args)} in expression {self.source!r}")
                return ("call", text, tuple(args))
            if text not in self.allowed:
                raise ConfigurationError(
                    f"unknown symbol {text!r} in expression {self.source!r}; "
                    f"allowed here: {sorted(self.allowed)}")
            self.names.add(text)
            return ("var", text)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ConfigurationError(
            f"unexpected token {text!r} in expression {self.source!r}")


def _eval(node, env):
    op = node[0]
    if op == "num":
        return np.float64(node[1])
    if op == "var":
        return env[node[1]]
    if op == "neg":
        return -_eval(node[1], env)
    if op == "add":
        return _eval(node[1], env) + _eval(node[2], env)
    if op == "sub":
        return _eval(node[1], env) - _eval(node[2], env)
    if op == "mul":
        return _eval(node[1], env) * _eval(node[2], env)
    if op == "div":
        return _eval(node[1], env) / _eval(node[2], env)
    if op == "call":
        name, args = node[1], node[2]
        if name == "abs":
            return np.abs(_eval(args[0], env))
        x = _eval(args[0], env)
        c = _eval(args[1], env)
        return x / (c * (1.0 + x))
    raise AssertionError(f"corrupt expression node {node!r}")


@dataclass(frozen=True)
class Expression:
    """A parsed expression; call it with keyword arguments for symbols.

    Scalars are promoted to numpy floats so division follows IEEE
    semantics uniformly (no ZeroDivisionError on scalar paths).
    """

    source: str
    ast: tuple
    variables: frozenset[str]

    def __call__(self, **env):
        coerced = {k: (np.float64(v) if isinstance(v, (int, float)) else v)
                   for k, v in env.items()}
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return _eval(self.ast, coerced)


def parse_expression(source: str, allowed: Iterable[str]) -> Expression:
    """Parse ``source`` admitting only the given variable names."""
    if not isinstance(source, str) or not source.strip():
        raise ConfigurationError(f"expression must be a non-empty string, got {source!r}")
    parser = _Parser(source, frozenset(allowed))
    ast = parser.parse()
    return Expression(source=source, ast=ast, variables=frozenset(parser.names))
