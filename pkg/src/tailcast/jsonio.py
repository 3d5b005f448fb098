"""JSON output with every float printed at 17 significant digits.

The stdlib encoder prints the shortest round-trip repr, which varies in
length; fixed-width digits keep artifacts stable across platforms.
"""

from __future__ import annotations

import json
import math

import numpy as np


def _float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def _encode(obj, indent, level):
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," + pad if indent else ", "
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = (f"{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items())
        return "{" + pad + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) for v in obj):
            return "[" + ", ".join(_encode(v, 0, 0) for v in obj) + "]"
        return "[" + pad + sep.join(_encode(v, indent, level + 1) for v in obj) + end + "]"
    if hasattr(obj, "to_dict"):
        return _encode(obj.to_dict(), indent, level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"
