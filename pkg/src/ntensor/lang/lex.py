"""Tokenizer for the tensor expression language.

Whitespace (including newlines) only separates tokens; ``#`` starts a
comment running to end of line.  Identifiers are letters, digits, and
underscores starting with a letter or underscore, plus trailing prime
marks.  Numbers require a digit after the decimal point, so ``3.{ax}``
lexes as a contraction on the scalar 3.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .diagnostics import ParseError

RESERVED = frozenset({"axis", "print", "check", "grad", "over", "random", "inf"})

_TOKEN_RE = re.compile(
    r"""
    (?P<WS>\s+)
  | (?P<COMMENT>\#[^\n]*)
  | (?P<NUMBER>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<IDENT>[A-Za-z_][A-Za-z0-9_]*'*)
  | (?P<SYM>->|\.\{|[=:,()\[\]{}+\-*/])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "IDENT", "NUMBER", "EOF", or the symbol text itself
    text: str
    line: int
    col: int


def tokenize(source: str) -> list:
    tokens = []
    pos = 0
    line, col = 1, 1
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(line, col, f"unexpected character {source[pos]!r}")
        text = m.group(0)
        kind = m.lastgroup
        if kind == "NUMBER":
            tokens.append(Token("NUMBER", text, line, col))
        elif kind == "IDENT":
            tokens.append(Token("IDENT", text, line, col))
        elif kind == "SYM":
            tokens.append(Token(text, text, line, col))
        # WS and COMMENT are skipped
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    tokens.append(Token("EOF", "", line, col))
    return tokens
