"""Canonical JSON helpers.

Reports and API payloads must serialize deterministically (byte-identical for
identical inputs) and survive strict JSON parsers, so non-finite floats are
mapped to the strings "Infinity" / "-Infinity" and NaN to null.
"""

from __future__ import annotations

import dataclasses
import json
import math
from typing import Any

import numpy as np


def to_jsonable(obj: Any) -> Any:
    """Recursively convert dataclasses, numpy scalars/arrays and floats."""
    if obj is None or isinstance(obj, (bool, str, int)):
        return obj
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        if math.isinf(obj):
            return "Infinity" if obj > 0 else "-Infinity"
        return obj
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return to_jsonable(obj.item())
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def from_json_float(value: Any) -> float | None:
    """Inverse of the non-finite float mapping used by :func:`to_jsonable`."""
    if value == "Infinity":
        return math.inf
    if value == "-Infinity":
        return -math.inf
    return value


def dumps(obj: Any, indent: int | None = None) -> str:
    """Deterministic JSON encoding (fixed separators, no NaN literals)."""
    payload = to_jsonable(obj)
    if indent is None:
        return json.dumps(payload, allow_nan=False, separators=(",", ":"))
    return json.dumps(payload, allow_nan=False, indent=indent)
