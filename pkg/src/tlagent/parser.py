"""Formula-language lexer, precedence-climbing parser and formatter.

Precedence, tightest first::

    !  X  N  F  G  F[a,b]  G[a,b]     prefix operators
    U  R                              right-associative
    &                                 left-associative
    |                                 left-associative
    ->                                right-associative

The grammar is documented for users in SPEC_LANGUAGE.md.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import BoundError, FormulaSyntaxError
from .formula import (
    FALSE, TRUE, Always, And, Atom, Bottom, BoundedAlways, BoundedEventually,
    Eventually, Formula, Implies, Next, Not, Or, Release, Top, Until, WeakNext,
    iter_postorder,
)

__all__ = ["parse_formula", "format_formula", "tokenize", "Token"]

_TOKEN_RE = re.compile(r"\s*(?:(->)|([!&|()\[\],])|([A-Za-z0-9_]+))")

_UNARY = {"X": Next, "N": WeakNext, "F": Eventually, "G": Always}
_BINARY_TEMPORAL = {"U": Until, "R": Release}


@dataclass(frozen=True)
class Token:
    kind: str  # "op", "word", "end"
    text: str
    pos: int

    def describe(self) -> str:
        return "end of input" if self.kind == "end" else repr(self.text)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    n = len(text)
    while True:
        while pos < n and text[pos].isspace():
            pos += 1
        if pos >= n:
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise FormulaSyntaxError(
                f"lexical error at position {pos}: unexpected character {text[pos]!r}",
                text, pos)
        start = m.start(m.lastindex)
        tok = m.group(m.lastindex)
        tokens.append(Token("word" if m.lastindex == 3 else "op", tok, start))
        pos = m.end()
    tokens.append(Token("end", "", n))
    return tokens


_PRIMARY_START = frozenset({"'('", "'!'", "'X'", "'N'", "'F'", "'G'", "'true'", "'false'",
                            "atom"})


MAX_NESTING = 100


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0
        self.depth = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.kind != "end" and self.tok.text == text

    def error(self, expected):
        t = self.tok
        exp = ", ".join(sorted(expected))
        raise FormulaSyntaxError(
            f"syntax error at position {t.pos}: expected one of {exp}; got {t.describe()}",
            self.text, t.pos, expected)

    def expect(self, text: str):
        if not self.at(text):
            self.error({repr(text)})
        return self.advance()

    def parse(self) -> Formula:
        f = self.implication()
        if self.tok.kind != "end":
            self.error({"end of input", "'->'", "'|'", "'&'", "'U'", "'R'"})
        return f

    def implication(self) -> Formula:
        operands = [self.disjunction()]
        while self.at("->"):
            self.advance()
            operands.append(self.disjunction())
        f = operands.pop()
        while operands:
            f = Implies(operands.pop(), f)
        return f

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.at("|"):
            self.advance()
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.temporal_binary()
        while self.at("&"):
            self.advance()
            f = And(f, self.temporal_binary())
        return f

    def temporal_binary(self) -> Formula:
        operands = [self.unary()]
        ops = []
        while self.tok.kind == "word" and self.tok.text in _BINARY_TEMPORAL:
            ops.append(_BINARY_TEMPORAL[self.advance().text])
            operands.append(self.unary())
        f = operands.pop()
        while ops:
            f = ops.pop()(operands.pop(), f)
        return f

    def unary(self) -> Formula:
        # prefix chains are folded iteratively so long chains cannot overflow
        prefixes = []
        while True:
            t = self.tok
            if t.kind == "op" and t.text == "!":
                self.advance()
                prefixes.append((Not, None))
            elif t.kind == "word" and t.text in _UNARY:
                self.advance()
                if t.text in ("F", "G") and self.at("["):
                    cls = BoundedEventually if t.text == "F" else BoundedAlways
                    prefixes.append((cls, self.bounds()))
                else:
                    prefixes.append((_UNARY[t.text], None))
            else:
                break
        f = self.primary()
        for cls, bounds in reversed(prefixes):
            if bounds is None:
                f = cls(f)
                continue
            lo, hi, pos = bounds
            try:
                f = cls(lo, hi, f)
            except BoundError as exc:
                raise BoundError(f"{exc} at position {pos}") from None
        return f

    def bounds(self):
        start = self.advance().pos
        lo = self.integer()
        self.expect(",")
        hi = self.integer()
        self.expect("]")
        if lo > hi:
            raise BoundError(f"bound error at position {start}: lower bound {lo} "
                             f"exceeds upper bound {hi}")
        return lo, hi, start

    def integer(self) -> int:
        t = self.tok
        if t.kind == "word" and t.text.isdigit():
            self.advance()
            return int(t.text)
        self.error({"integer"})

    def primary(self) -> Formula:
        t = self.tok
        if t.kind == "op" and t.text == "(":
            if self.depth >= MAX_NESTING:
                raise FormulaSyntaxError(
                    f"syntax error at position {t.pos}: parentheses nested deeper than "
                    f"{MAX_NESTING} levels", self.text, t.pos, ())
            self.advance()
            self.depth += 1
            f = self.implication()
            self.expect(")")
            self.depth -= 1
            return f
        if t.kind == "word":
            if t.text == "true":
                self.advance()
                return TRUE
            if t.text == "false":
                self.advance()
                return FALSE
            if t.text not in _BINARY_TEMPORAL:
                self.advance()
                return Atom(t.text)
        self.error(_PRIMARY_START)


def parse_formula(text: str) -> Formula:
    """Parse a formula string into a formula AST.

    Raises FormulaSyntaxError (with ``position`` and ``expected``) on lexical
    or syntax errors and BoundError when a bound interval has lo > hi.
    """
    return _Parser(text).parse()


_PREFIX = {Not: "!", Next: "X", WeakNext: "N", Eventually: "F", Always: "G"}
_INFIX = {And: "&", Or: "|", Implies: "->", Until: "U", Release: "R"}


def format_formula(f: Formula) -> str:
    """Render a formula fully parenthesized so that it reparses to itself."""
    out: dict = {}

    def wrap(node):
        s = out[node]
        return s if type(node) in (Atom, Top, Bottom) else f"({s})"

    for node in iter_postorder(f):
        cls = type(node)
        if cls is Atom:
            s = node.name
        elif cls is Top:
            s = "true"
        elif cls is Bottom:
            s = "false"
        elif cls in _PREFIX:
            s = f"{_PREFIX[cls]} {wrap(node.arg)}"
        elif cls in _INFIX:
            s = f"{wrap(node.left)} {_INFIX[cls]} {wrap(node.right)}"
        elif cls is BoundedEventually:
            s = f"F[{node.lo},{node.hi}] {wrap(node.arg)}"
        elif cls is BoundedAlways:
            s = f"G[{node.lo},{node.hi}] {wrap(node.arg)}"
        else:  # pragma: no cover
            raise TypeError(f"unknown formula node {node!r}")
        out[node] = s
    return out[f]
