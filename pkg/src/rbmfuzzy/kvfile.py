"""Self-describing key-value text files with exact float round trip.

One entry per line::

    key :<tag> = value

Tags: ``i`` int, ``f`` float (hex literal), ``b`` bool, ``s`` JSON string,
``a<shape>`` float array stored as space-separated hex literals in row-major
order, e.g. ``V :a3x2 = 0x1.0p+0 ...``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError

HEADER = "# rbmfuzzy-kv 1"


def _encode(key, value):
    if isinstance(value, (bool, np.bool_)):
        return f"{key} :b = {'true' if value else 'false'}"
    if isinstance(value, (int, np.integer)):
        return f"{key} :i = {int(value)}"
    if isinstance(value, (float, np.floating)):
        return f"{key} :f = {float(value).hex()}"
    if isinstance(value, str):
        return f"{key} :s = {json.dumps(value)}"
    arr = np.asarray(value, dtype=float)
    shape = "x".join(str(s) for s in arr.shape)
    body = " ".join(float(v).hex() for v in arr.ravel())
    return f"{key} :a{shape} = {body}"


def dumps(data: dict) -> str:
    lines = [HEADER]
    for key, value in data.items():
        if value is None:
            continue
        if any(ch in key for ch in " :=\n"):
            raise ValueError(f"invalid key {key!r}")
        lines.append(_encode(key, value))
    return "\n".join(lines) + "\n"


def dump(data: dict, path):
    Path(path).write_text(dumps(data), encoding="utf-8")


def _decode(tag, raw, lineno):
    try:
        if tag == "i":
            return int(raw)
        if tag == "f":
            return float.fromhex(raw)
        if tag == "b":
            return {"true": True, "false": False}[raw]
        if tag == "s":
            return json.loads(raw)
        if tag.startswith("a"):
            shape = tuple(int(s) for s in tag[1:].split("x")) if tag[1:] else ()
            vals = [float.fromhex(t) for t in raw.split()]
            return np.array(vals, dtype=float).reshape(shape)
    except (ValueError, KeyError) as exc:
        raise DataError(f"line {lineno}: cannot decode {tag!r} value: {exc}") from None
    raise DataError(f"line {lineno}: unknown tag {tag!r}")


def loads(text: str) -> dict:
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise DataError("not a rbmfuzzy key-value file")
    out = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            lhs, raw = line.split(" =", 1)
            key, tag = lhs.split(" :", 1)
        except ValueError:
            raise DataError(f"line {lineno}: malformed entry") from None
        out[key.strip()] = _decode(tag.strip(), raw.strip(), lineno)
    return out


def load(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    return loads(path.read_text(encoding="utf-8"))
