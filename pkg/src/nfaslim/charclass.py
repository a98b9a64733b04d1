"""Symbol sets as ANML-style character-class strings.

``*`` is the full alphabet, a lone character is itself, ``[...]`` is a class
with ``a-z`` ranges and an optional leading ``^`` for negation. Bytes that are
not printable, or that would collide with class syntax or CSV/XML quoting,
are written as ``\\xHH``.
"""

from __future__ import annotations

from .core import ALPHABET_SIZE

_SPECIAL = set(b"[]\\-^*,\"'<>&")


class CharClassError(ValueError):
    pass


def _escape(sym: int) -> str:
    if 0x21 <= sym <= 0x7E and sym not in _SPECIAL:
        return chr(sym)
    return f"\\x{sym:02x}"


def format_symbols(symbols, alphabet_size: int = ALPHABET_SIZE) -> str:
    syms = sorted(set(symbols))
    if len(syms) == alphabet_size and syms == list(range(alphabet_size)):
        return "*"
    if len(syms) == 1:
        return _escape(syms[0])
    parts = []
    i = 0
    while i < len(syms):
        j = i
        while j + 1 < len(syms) and syms[j + 1] == syms[j] + 1:
            j += 1
        if j - i >= 2:
            parts.append(f"{_escape(syms[i])}-{_escape(syms[j])}")
        else:
            parts.extend(_escape(s) for s in syms[i:j + 1])
        i = j + 1
    return "[" + "".join(parts) + "]"


def _read_char(text: str, pos: int) -> tuple[int, int]:
    ch = text[pos]
    if ch != "\\":
        return ord(ch), pos + 1
    if pos + 1 >= len(text):
        raise CharClassError(f"dangling escape in {text!r}")
    nxt = text[pos + 1]
    if nxt == "x":
        hexpart = text[pos + 2:pos + 4]
        try:
            return int(hexpart, 16), pos + 4
        except ValueError:
            raise CharClassError(f"bad \\x escape in {text!r}") from None
    named = {"n": 10, "t": 9, "r": 13, "s": 32}
    return named.get(nxt, ord(nxt)), pos + 2


def parse_symbols(text: str, alphabet_size: int = ALPHABET_SIZE) -> frozenset[int]:
    if text == "*":
        return frozenset(range(alphabet_size))
    if not text:
        raise CharClassError("empty symbol set")
    if text[0] != "[":
        sym, end = _read_char(text, 0)
        if end != len(text):
            raise CharClassError(f"expected a single symbol or a [class], got {text!r}")
        out = {sym}
    else:
        if not text.endswith("]") or len(text) < 2:
            raise CharClassError(f"unterminated class {text!r}")
        body = text[1:-1]
        negate = body.startswith("^")
        if negate:
            body = body[1:]
        out = set()
        pos = 0
        while pos < len(body):
            lo, pos = _read_char(body, pos)
            if pos < len(body) - 1 and body[pos] == "-":
                hi, pos = _read_char(body, pos + 1)
                if hi < lo:
                    raise CharClassError(f"reversed range in {text!r}")
                out.update(range(lo, hi + 1))
            else:
                out.add(lo)
        if negate:
            out = set(range(alphabet_size)) - out
    if any(s >= alphabet_size for s in out):
        raise CharClassError(f"symbol outside alphabet in {text!r}")
    return frozenset(out)
