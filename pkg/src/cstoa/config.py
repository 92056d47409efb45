"""Flat ``key = value`` configuration files.

Lines are ``key = value``; ``#`` starts a comment. Keys are case-sensitive
(``Gamma`` and ``gamma`` are different keys).
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .errors import ParameterError

_SECTION = "config"


def parse_flat(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#",), comment_prefixes=("#",), interpolation=None, strict=True
    )
    parser.optionxform = str
    try:
        parser.read_string(f"[{_SECTION}]\n{text}")
    except configparser.Error as exc:
        raise ParameterError(f"malformed config: {exc}") from exc
    return dict(parser[_SECTION])


def read_flat(path) -> dict[str, str]:
    return parse_flat(Path(path).read_text())


def parse_overrides(items) -> dict[str, str]:
    """Turn ``["key=value", ...]`` (command-line ``--set``) into a dict."""
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ParameterError(f"override {item!r} is not of the form key=value")
        out[key.strip()] = value.strip()
    return out


def to_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ParameterError(f"not a boolean: {value!r}")


def to_float(value) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ParameterError(f"not a number: {value!r}") from None


def to_int(value) -> int:
    try:
        f = float(value)
    except (TypeError, ValueError):
        raise ParameterError(f"not an integer: {value!r}") from None
    if f != int(f):
        raise ParameterError(f"not an integer: {value!r}")
    return int(f)
