"""Tokenizer for the contract mini-language."""

from __future__ import annotations

from dataclasses import dataclass

from .diagnostics import Diagnostic, ParseFailure, SEV_ERROR

KEYWORDS = {
    "class", "int", "bool", "string", "void", "new", "for", "while", "if",
    "else", "return", "null", "true", "false", "out", "this",
    "memreq", "esc", "dest_esc", "dest_local", "add_esc", "bind_esc",
    "requires", "iteration_space", "ensure", "max",
}

_TWO_CHAR = ("<=", ">=", "==", "!=", "&&", "||", "..", "+=")
_ONE_CHAR = "+-*/<>=;,.(){}[]!"


@dataclass(frozen=True)
class Token:
    kind: str  # ident | keyword | int | string | punct | eof
    value: str
    line: int
    col: int


def tokenize(source: str, file: str = "<mcl>") -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i, n = 0, len(source)

    def fail(msg: str):
        raise ParseFailure([Diagnostic(SEV_ERROR, "LexError", msg, file, line, col)])

    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_col = col
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            tokens.append(Token("int", source[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            tokens.append(Token("keyword" if word in KEYWORDS else "ident", word, line, start_col))
            col += j - i
            i = j
            continue
        if ch == '"':
            j = i + 1
            buf = []
            while j < n and source[j] != '"':
                if source[j] == "\n":
                    fail("unterminated string literal")
                if source[j] == "\\" and j + 1 < n:
                    esc = source[j + 1]
                    buf.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc, esc))
                    j += 2
                else:
                    buf.append(source[j])
                    j += 1
            if j >= n:
                fail("unterminated string literal")
            tokens.append(Token("string", "".join(buf), line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        two = source[i:i + 2]
        if two in _TWO_CHAR:
            tokens.append(Token("punct", two, line, start_col))
            i += 2
            col += 2
            continue
        if ch in _ONE_CHAR:
            tokens.append(Token("punct", ch, line, start_col))
            i += 1
            col += 1
            continue
        fail(f"unexpected character {ch!r}")
    tokens.append(Token("eof", "", line, col))
    return tokens
