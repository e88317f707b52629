"""Formula ASTs, parser, and printer.

Grammar (ASCII):

    formula := imp
    imp     := or ('->' imp)?          right associative
    or      := and ('|' and)*          left associative
    and     := unary ('&' unary)*      left associative
    unary   := 'box' unary | 'dia' unary | primary
    primary := 'bot' | ident | '(' formula ')'

Modalities bind tightest, then '&', then '|', then '->'.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

from .errors import ParseError


@dataclass(frozen=True)
class Bot:
    def __str__(self) -> str:
        return fmt(self)


@dataclass(frozen=True)
class Atom:
    name: str

    def __str__(self) -> str:
        return fmt(self)


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return fmt(self)


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return fmt(self)


@dataclass(frozen=True)
class Imp:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return fmt(self)


@dataclass(frozen=True)
class Box:
    sub: "Formula"

    def __str__(self) -> str:
        return fmt(self)


@dataclass(frozen=True)
class Dia:
    sub: "Formula"

    def __str__(self) -> str:
        return fmt(self)


Formula = Union[Bot, Atom, And, Or, Imp, Box, Dia]

_KEYWORDS = {"bot", "box", "dia"}

_TOKEN_RE = re.compile(r"\s*(->|[&|()]|[A-Za-z_][A-Za-z0-9_]*)")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens: list[tuple[str, int]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ParseError(f"unexpected character {stripped[0]!r}", len(text) - len(stripped))
        tokens.append((m.group(1), m.start(1)))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> str | None:
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def pos(self) -> int:
        return self.tokens[self.i][1] if self.i < len(self.tokens) else len(self.text)

    def next(self) -> str:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", len(self.text))
        self.i += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.peek()
        if got != tok:
            raise ParseError(f"expected {tok!r}, got {got!r}", self.pos())
        self.i += 1

    def parse_imp(self) -> Formula:
        left = self.parse_or()
        if self.peek() == "->":
            self.next()
            return Imp(left, self.parse_imp())
        return left

    def parse_or(self) -> Formula:
        f = self.parse_and()
        while self.peek() == "|":
            self.next()
            f = Or(f, self.parse_and())
        return f

    def parse_and(self) -> Formula:
        f = self.parse_unary()
        while self.peek() == "&":
            self.next()
            f = And(f, self.parse_unary())
        return f

    def parse_unary(self) -> Formula:
        tok = self.peek()
        if tok == "box":
            self.next()
            return Box(self.parse_unary())
        if tok == "dia":
            self.next()
            return Dia(self.parse_unary())
        return self.parse_primary()

    def parse_primary(self) -> Formula:
        tok = self.peek()
        if tok == "(":
            self.next()
            f = self.parse_imp()
            self.expect(")")
            return f
        if tok == "bot":
            self.next()
            return Bot()
        if tok is None:
            raise ParseError("unexpected end of input", len(self.text))
        if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok) and tok not in _KEYWORDS:
            self.next()
            return Atom(tok)
        raise ParseError(f"unexpected token {tok!r}", self.pos())


def parse(text: str) -> Formula:
    p = _Parser(text)
    f = p.parse_imp()
    if p.peek() is not None:
        raise ParseError(f"trailing input {p.peek()!r}", p.pos())
    return f


# Precedence levels for minimal-paren printing; higher binds tighter.
_PREC = {Imp: 1, Or: 2, And: 3, Box: 4, Dia: 4, Bot: 5, Atom: 5}


def _prec(f: Formula) -> int:
    return _PREC[type(f)]


@lru_cache(maxsize=None)
def fmt(f: Formula) -> str:
    """Print with the fewest parentheses; `parse(fmt(f)) == f`."""
    if isinstance(f, Bot):
        return "bot"
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Box):
        return "box " + _wrap(f.sub, 4)
    if isinstance(f, Dia):
        return "dia " + _wrap(f.sub, 4)
    if isinstance(f, And):
        # left associative: the right child needs parens at equal precedence
        return _wrap(f.left, 3) + " & " + _wrap(f.right, 4)
    if isinstance(f, Or):
        return _wrap(f.left, 2) + " | " + _wrap(f.right, 3)
    if isinstance(f, Imp):
        # right associative
        return _wrap(f.left, 2) + " -> " + _wrap(f.right, 1)
    raise TypeError(f"not a formula: {f!r}")


def _wrap(f: Formula, minimum: int) -> str:
    s = fmt(f)
    return f"({s})" if _prec(f) < minimum else s


def key(f: Formula) -> str:
    """Total order used wherever formula scan order matters."""
    return fmt(f)


@lru_cache(maxsize=None)
def subformulas(f: Formula) -> tuple[Formula, ...]:
    """All distinct subformulas, outermost first, left to right."""
    out: list[Formula] = []
    seen: set[Formula] = set()

    def walk(g: Formula) -> None:
        if g in seen:
            return
        seen.add(g)
        out.append(g)
        if isinstance(g, (And, Or, Imp)):
            walk(g.left)
            walk(g.right)
        elif isinstance(g, (Box, Dia)):
            walk(g.sub)

    walk(f)
    return tuple(out)
