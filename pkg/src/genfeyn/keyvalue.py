"""Plain ``key = value`` documents used for model and parameter files.

Blank lines and ``#`` comments are ignored.  Values may be integers,
decimals, rationals written ``p/q``, ``true``/``false`` or bracketed lists
of those.  Errors carry the offending line number.
"""
from __future__ import annotations

import ast
import re
from fractions import Fraction
from typing import Any

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_RATIONAL = re.compile(r"^[+-]?\d+/\d+$")


class KeyValueError(ValueError):
    def __init__(self, msg: str, line: int | None = None, source: str | None = None):
        self.line = line
        where = f"{source or '<input>'}:{line}: " if line is not None else ""
        super().__init__(where + msg)


def _scalar(tok: str) -> Any:
    tok = tok.strip()
    low = tok.lower()
    if low in ("true", "false"):
        return low == "true"
    if _RATIONAL.match(tok):
        return Fraction(tok)
    return ast.literal_eval(tok)


def parse_value(raw: str) -> Any:
    raw = raw.strip()
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        return [parse_value(t) for t in inner.split(",")] if inner else []
    val = _scalar(raw)
    if not isinstance(val, (bool, int, float, Fraction)):
        raise ValueError(f"unsupported value {raw!r}")
    return val


def parse_keyvalue(text: str, source: str | None = None) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise KeyValueError(f"expected 'key = value', got {line.strip()!r}", lineno, source)
        key, raw = (t.strip() for t in s.split("=", 1))
        if not _KEY.match(key):
            raise KeyValueError(f"invalid key {key!r}", lineno, source)
        if key in out:
            raise KeyValueError(f"duplicate key {key!r}", lineno, source)
        try:
            out[key] = parse_value(raw)
        except (ValueError, SyntaxError) as exc:
            raise KeyValueError(f"bad value for {key!r}: {raw!r}", lineno, source) from exc
    return out


def read_keyvalue(path: str) -> dict[str, Any]:
    with open(path) as fh:
        return parse_keyvalue(fh.read(), source=path)
