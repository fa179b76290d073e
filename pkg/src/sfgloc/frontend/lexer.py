"""Tokenizer for the supported Java subset.

Comments never become tokens; they are collected on a side channel so the
method's natural-language context can be fed to the model separately.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..errors import LexError

KEYWORDS = frozenset("""
    abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized this
    throw throws transient try void volatile while var yield
""".split())

LITERAL_WORDS = frozenset({"true", "false", "null"})

# longest first so that maximal munch falls out of the alternation order
OPERATORS = sorted("""
    >>>= <<= >>= >>> ... -> :: ++ -- && || == != <= >= += -= *= /= %= &= |= ^=
    << >> + - * / % = < > ! ~ ? : & | ^
""".split(), key=len, reverse=True)

PUNCTUATION = frozenset("(){}[];,.")

_NUMBER = re.compile(
    r"""
    0[xX][0-9a-fA-F_]+[lL]?
    | 0[bB][01_]+[lL]?
    | (?:\d[\d_]*\.(?:\d[\d_]*)?|\.\d[\d_]*)(?:[eE][+-]?\d+)?[fFdD]?
    | \d[\d_]*(?:[eE][+-]?\d+)[fFdD]?
    | \d[\d_]*[fFdDlL]?
    """,
    re.VERBOSE,
)
_STRING = re.compile(r'"(?:[^"\\\n]|\\.)*"')
_CHAR = re.compile(r"'(?:[^'\\\n]|\\.)+'")


@dataclass(frozen=True)
class Token:
    kind: str  # keyword | identifier | literal | operator | punctuation
    text: str
    line: int
    col: int
    start: int
    end: int

    def __str__(self):
        return self.text


@dataclass(frozen=True)
class Comment:
    text: str
    line: int
    col: int
    start: int
    end: int

    @property
    def body(self):
        if self.text.startswith("//"):
            return self.text[2:].strip()
        return self.text[2:-2].strip(" *\n\t\r")


@dataclass
class TokenStream:
    source: str
    tokens: list[Token] = field(default_factory=list)
    comments: list[Comment] = field(default_factory=list)

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]

    @property
    def texts(self):
        return [t.text for t in self.tokens]

    @property
    def comment_text(self):
        """All comments of the stream joined into one string."""
        return " ".join(c.body for c in self.comments if c.body)


def _is_ident_start(ch):
    return ch.isalpha() or ch in "_$"


def _is_ident_part(ch):
    return ch.isalnum() or ch in "_$"


def tokenize(source: str) -> TokenStream:
    """Split ``source`` into tokens plus a comment channel.

    Raises LexError carrying the 1-based line/column of the first character
    that cannot start any token.
    """
    stream = TokenStream(source)
    i, n = 0, len(source)
    line, line_start = 1, 0

    def advance_lines(a, b):
        nonlocal line, line_start
        k = source.find("\n", a, b)
        while k != -1:
            line += 1
            line_start = k + 1
            k = source.find("\n", k + 1, b)

    while i < n:
        ch = source[i]
        col = i - line_start + 1
        if ch in " \t\r\n\f":
            if ch == "\n":
                line += 1
                line_start = i + 1
            i += 1
            continue
        if source.startswith("//", i):
            j = source.find("\n", i)
            j = n if j == -1 else j
            stream.comments.append(Comment(source[i:j], line, col, i, j))
            i = j
            continue
        if source.startswith("/*", i):
            j = source.find("*/", i + 2)
            if j == -1:
                raise LexError("unterminated block comment", line, col)
            j += 2
            stream.comments.append(Comment(source[i:j], line, col, i, j))
            advance_lines(i, j)
            i = j
            continue

        kind = None
        if _is_ident_start(ch):
            j = i + 1
            while j < n and _is_ident_part(source[j]):
                j += 1
            word = source[i:j]
            kind = "literal" if word in LITERAL_WORDS else "keyword" if word in KEYWORDS else "identifier"
        elif ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            m = _NUMBER.match(source, i)
            j = m.end()
            if j < n and _is_ident_part(source[j]):
                raise LexError(f"malformed number {source[i:j + 1]!r}", line, col)
            kind = "literal"
        elif ch == '"':
            m = _STRING.match(source, i)
            if m is None:
                raise LexError("unterminated string literal", line, col)
            j, kind = m.end(), "literal"
        elif ch == "'":
            m = _CHAR.match(source, i)
            if m is None:
                raise LexError("malformed char literal", line, col)
            j, kind = m.end(), "literal"
        elif ch in PUNCTUATION and not source.startswith("...", i):
            j, kind = i + 1, "punctuation"
        else:
            for op in OPERATORS:
                if source.startswith(op, i):
                    j, kind = i + len(op), "operator"
                    break
        if kind is None:
            raise LexError(f"illegal character {ch!r}", line, col)
        stream.tokens.append(Token(kind, source[i:j], line, col, i, j))
        i = j
    return stream
