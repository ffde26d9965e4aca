"""Deterministic JSON encoding for API payloads and stored documents.

Floats are always written with 17 significant digits so that payloads are
byte-stable across processes and round-trip exactly through float64. The
stdlib encoder uses repr() shortest-form floats, which is why this exists.
"""

from __future__ import annotations

import json
import math
from typing import Any

__all__ = ["dumps", "dumps_bytes", "format_float"]


def format_float(value: float) -> str:
    """Render a float with 17 significant digits as a JSON number token."""
    if math.isnan(value) or math.isinf(value):
        raise ValueError(f"non-finite float not representable in JSON: {value!r}")
    text = format(float(value), ".17g")
    # %g drops the decimal point for integral values; keep the token a valid
    # JSON number either way (it already is), nothing further needed.
    return text


def _encode(obj: Any, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, int):
        out.append(str(int(obj)))
    elif isinstance(obj, dict):
        out.append("{")
        first = True
        for key, value in obj.items():
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be str, got {type(key).__name__}")
            if not first:
                out.append(",")
            first = False
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(":")
            _encode(value, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _encode(item, out)
        out.append("]")
    else:
        # numpy scalars arrive here; coerce through their Python equivalents.
        if hasattr(obj, "item"):
            _encode(obj.item(), out)
        else:
            raise TypeError(f"not JSON-serializable: {type(obj).__name__}")


def dumps(obj: Any) -> str:
    """Serialize to compact JSON with deterministic float formatting."""
    out: list[str] = []
    _encode(obj, out)
    return "".join(out)


def dumps_bytes(obj: Any) -> bytes:
    return dumps(obj).encode("utf-8")
