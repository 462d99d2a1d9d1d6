"""Flat key-value text format shared by run configs and tech-library overrides.

Grammar (one statement per line)::

    # comment
    [section]            # prefixes following keys with "section."
    key = value          # key: dotted identifier; value: JSON literal

Values are JSON literals: numbers, double-quoted strings, ``true``/``false``
and lists.  Every parsed entry remembers its line number so validation errors
can point at it.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

_DECODER = json.JSONDecoder()
_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z0-9_]+)*$")


class ConfigError(ValueError):
    """Parse or validation error naming the offending key and line."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


def parse_kv_text(text: str) -> dict[str, tuple[object, int]]:
    entries: dict[str, tuple[object, int]] = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            if not line.endswith("]") or not _KEY.match(line[1:-1].strip()):
                raise ConfigError("malformed section header", line=lineno)
            section = line[1:-1].strip() + "."
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, _, value_text = line.partition("=")
        key = section + key.strip()
        if not _KEY.match(key):
            raise ConfigError("malformed key", key=key, line=lineno)
        value_text = value_text.strip()
        try:
            value, end = _DECODER.raw_decode(value_text)
        except json.JSONDecodeError:
            end, value = -1, None
        # trailing comments are allowed after the value
        rest = value_text[end:].strip() if end >= 0 else "?"
        if rest and not rest.startswith("#"):
            raise ConfigError(f"cannot parse value {value_text!r}", key=key, line=lineno)
        if key in entries:
            raise ConfigError("duplicate key", key=key, line=lineno)
        entries[key] = (value, lineno)
    return entries


def parse_kv_file(path: Path) -> dict[str, tuple[object, int]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_kv_text(text)
