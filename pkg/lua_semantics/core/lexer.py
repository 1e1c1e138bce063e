"""
Tokenizer for Lua 5.2 source text.

Source is handled as bytes, since Lua strings are byte strings. The lexer
also understands the run-time syntax (``$builtIn``, ``$name`` identifiers)
when asked to, which is how library code and dumped functions are read back.
"""

import re
from dataclasses import dataclass
from typing import List, Optional, Union

from lua_semantics.core.terms import LuaSemanticsError, display_chunk_name


class ParseError(LuaSemanticsError):
    """Exception raised for lexical and syntactic errors in a chunk."""

    def __init__(self, message: str, line: int = 0, column: int = 0, chunk_name: str = "?"):
        self.message = message
        self.line = line
        self.column = column
        self.chunk_name = chunk_name
        super().__init__(f"{display_chunk_name(chunk_name)}:{line}: {message}")


KEYWORDS = frozenset({
    "and", "break", "do", "else", "elseif", "end", "false", "for", "function",
    "goto", "if", "in", "local", "nil", "not", "or", "repeat", "return", "then",
    "true", "until", "while",
})

# longest first so that '...' wins over '..' and '.'
OPERATORS = (
    "...", "..", "==", "~=", "<=", ">=", "::",
    "+", "-", "*", "/", "%", "^", "#", "<", ">", "=",
    "(", ")", "{", "}", "[", "]", ";", ":", ",", ".",
)

_NAME_RE = re.compile(rb"[A-Za-z_][A-Za-z0-9_]*")
_RUNTIME_NAME_RE = re.compile(rb"\$[A-Za-z_][A-Za-z0-9_]*")
_HEX_RE = re.compile(rb"0[xX]([0-9a-fA-F]*)(?:\.([0-9a-fA-F]*))?(?:[pP]([+-]?[0-9]+))?")
_DEC_RE = re.compile(rb"(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")
_NUMERAL_TAIL_RE = re.compile(rb"[A-Za-z0-9_.]")
_LONG_OPEN_RE = re.compile(rb"\[(=*)\[")
_SPACE = b" \t\r\n\f\v"

_SIMPLE_ESCAPES = {
    ord("a"): 7, ord("b"): 8, ord("f"): 12, ord("n"): 10, ord("r"): 13,
    ord("t"): 9, ord("v"): 11, ord("\\"): 92, ord('"'): 34, ord("'"): 39,
}


@dataclass
class Token:
    """A lexical token; ``kind`` is one of name, keyword, number, string, op, runtime, eof."""
    kind: str
    value: Union[str, float, bytes, None]
    line: int
    column: int

    def describe(self) -> str:
        """Token text as shown in 'near ...' diagnostics."""
        if self.kind == "eof":
            return "<eof>"
        if self.kind == "string":
            return "'" + self.value.decode("latin-1") + "'"  # type: ignore[union-attr]
        if self.kind == "number":
            return f"'{self.value:.14g}'"
        return f"'{self.value}'"


def parse_numeral(text: bytes) -> Optional[float]:
    """Convert a whole numeral (as accepted by the lexer and by tonumber) to a float.

    Returns None when ``text`` is not exactly one numeral.
    """
    match = _HEX_RE.fullmatch(text)
    if match:
        int_digits, frac_digits, exponent = match.group(1), match.group(2) or b"", match.group(3)
        if not int_digits and not frac_digits:
            return None
        mantissa = int((int_digits + frac_digits).decode("ascii") or "0", 16)
        scale = -4 * len(frac_digits) + (int(exponent) if exponent else 0)
        try:
            return float(mantissa) * 2.0 ** scale
        except OverflowError:
            return float("inf")
    if _DEC_RE.fullmatch(text):
        return float(text.decode("ascii"))
    return None


def str_to_number(text: bytes) -> Optional[float]:
    """String-to-number coercion: surrounding whitespace and a sign are allowed."""
    stripped = text.strip(_SPACE)
    negative = False
    if stripped[:1] in (b"-", b"+"):
        negative = stripped[:1] == b"-"
        stripped = stripped[1:]
    if not stripped:
        return None
    number = parse_numeral(stripped)
    if number is None:
        return None
    return -number if negative else number


class Lexer:
    """Converts a chunk into a list of tokens."""

    def __init__(self, source: bytes, chunk_name: str = "?", allow_runtime_syntax: bool = False):
        """
        Initialize the lexer.

        Args:
            source: Chunk text
            chunk_name: Name used in error messages
            allow_runtime_syntax: Accept ``$``-prefixed identifiers
        """
        if isinstance(source, str):
            source = source.encode("utf-8")
        self.source = source
        self.chunk_name = chunk_name
        self.allow_runtime_syntax = allow_runtime_syntax
        self.pos = 0
        self.line = 1
        self.line_start = 0

    def error(self, message: str, near: Optional[str] = None) -> ParseError:
        if near is not None:
            message = f"{message} near {near}"
        return ParseError(message, self.line, self.pos - self.line_start + 1, self.chunk_name)

    def tokenize(self) -> List[Token]:
        tokens = []
        if self.source.startswith(b"#"):
            # first line comment, as in a script with a shebang
            end = self.source.find(b"\n")
            self.pos = len(self.source) if end < 0 else end
        while True:
            token = self._next_token()
            tokens.append(token)
            if token.kind == "eof":
                return tokens

    def _newline(self) -> None:
        self.line += 1
        self.line_start = self.pos

    def _skip_space_and_comments(self) -> None:
        src = self.source
        while self.pos < len(src):
            ch = src[self.pos]
            if ch == 10:
                self.pos += 1
                self._newline()
            elif ch in _SPACE:
                self.pos += 1
            elif src.startswith(b"--", self.pos):
                self.pos += 2
                long_open = _LONG_OPEN_RE.match(src, self.pos)
                if long_open:
                    self._read_long_bracket(long_open, "comment")
                else:
                    end = src.find(b"\n", self.pos)
                    self.pos = len(src) if end < 0 else end
            else:
                return

    def _next_token(self) -> Token:
        self._skip_space_and_comments()
        src = self.source
        line, column = self.line, self.pos - self.line_start + 1
        if self.pos >= len(src):
            return Token("eof", None, line, column)
        ch = src[self.pos]

        match = _NAME_RE.match(src, self.pos)
        if match:
            self.pos = match.end()
            word = match.group().decode("ascii")
            return Token("keyword" if word in KEYWORDS else "name", word, line, column)

        if ch == ord("$"):
            match = _RUNTIME_NAME_RE.match(src, self.pos)
            if not self.allow_runtime_syntax or not match:
                self.pos += 1
                raise self.error("unexpected symbol", "'$'")
            self.pos = match.end()
            word = match.group().decode("ascii")
            return Token("runtime" if word == "$builtIn" else "name", word, line, column)

        if 48 <= ch <= 57 or (ch == ord(".") and src[self.pos + 1:self.pos + 2].isdigit()):
            return self._read_number(line, column)

        if ch in (ord('"'), ord("'")):
            return Token("string", self._read_short_string(ch), line, column)

        long_open = _LONG_OPEN_RE.match(src, self.pos)
        if long_open:
            return Token("string", self._read_long_bracket(long_open, "string"), line, column)
        if src.startswith(b"[=", self.pos):
            raise self.error("invalid long string delimiter", "'[='")

        for op in OPERATORS:
            if src.startswith(op.encode("ascii"), self.pos):
                self.pos += len(op)
                return Token("op", op, line, column)

        self.pos += 1
        raise self.error("unexpected symbol", "'" + chr(ch) + "'")

    def _read_number(self, line: int, column: int) -> Token:
        src = self.source
        match = _HEX_RE.match(src, self.pos) if src.startswith((b"0x", b"0X"), self.pos) else None
        if match is None:
            match = _DEC_RE.match(src, self.pos)
        end = match.end()
        while end < len(src) and _NUMERAL_TAIL_RE.match(src, end):
            end += 1
        text = src[self.pos:end]
        self.pos = end
        value = parse_numeral(text)
        if value is None:
            raise self.error("malformed number", "'" + text.decode("latin-1") + "'")
        return Token("number", value, line, column)

    def _read_short_string(self, quote: int) -> bytes:
        src = self.source
        self.pos += 1
        out = bytearray()
        while True:
            if self.pos >= len(src):
                raise self.error("unfinished string", "<eof>")
            ch = src[self.pos]
            if ch == quote:
                self.pos += 1
                return bytes(out)
            if ch in (10, 13):
                raise self.error("unfinished string", "'" + out.decode("latin-1") + "'")
            if ch != ord("\\"):
                out.append(ch)
                self.pos += 1
                continue
            self.pos += 1
            if self.pos >= len(src):
                raise self.error("unfinished string", "<eof>")
            esc = src[self.pos]
            if esc in _SIMPLE_ESCAPES:
                out.append(_SIMPLE_ESCAPES[esc])
                self.pos += 1
            elif esc in (10, 13):
                out.append(10)
                self.pos += 1
                if self.pos < len(src) and src[self.pos] in (10, 13) and src[self.pos] != esc:
                    self.pos += 1
                self._newline()
            elif esc == ord("x"):
                digits = src[self.pos + 1:self.pos + 3]
                if len(digits) < 2 or not all(chr(d) in "0123456789abcdefABCDEF" for d in digits):
                    raise self.error("hexadecimal digit expected", "'\\x'")
                out.append(int(digits, 16))
                self.pos += 3
            elif esc == ord("z"):
                self.pos += 1
                while self.pos < len(src) and src[self.pos] in _SPACE:
                    if src[self.pos] == 10:
                        self.pos += 1
                        self._newline()
                    else:
                        self.pos += 1
            elif 48 <= esc <= 57:
                match = re.compile(rb"[0-9]{1,3}").match(src, self.pos)
                code = int(match.group())
                if code > 255:
                    raise self.error("decimal escape too large", "'\\" + str(code) + "'")
                out.append(code)
                self.pos = match.end()
            else:
                raise self.error("invalid escape sequence", "'\\" + chr(esc) + "'")

    def _read_long_bracket(self, opener, what: str) -> bytes:
        src = self.source
        level = opener.group(1)
        closer = b"]" + level + b"]"
        start = opener.end()
        end = src.find(closer, start)
        if end < 0:
            raise self.error(f"unfinished long {what}", "<eof>")
        body = src[start:end]
        # a newline right after the opening bracket is not part of the string
        if body.startswith(b"\r\n") or body.startswith(b"\n\r"):
            body = body[2:]
        elif body[:1] in (b"\n", b"\r"):
            body = body[1:]
        for _ in range(src.count(b"\n", self.pos, end)):
            self.line += 1
        last_newline = src.rfind(b"\n", self.pos, end)
        self.pos = end + len(closer)
        if last_newline >= 0:
            self.line_start = last_newline + 1
        return body
