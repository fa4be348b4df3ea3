"""Small shared helpers: deterministic serialization, atomic writes, threading cap."""

from __future__ import annotations

import json
import math
import os
import tempfile

THREADS_ENV_VAR = "FAIRPRICE_THREADS"


def worker_limit() -> int:
    """Worker-count cap from the FAIRPRICE_THREADS environment variable.

    Defaults to 1 (serial). Values below 1 or unparsable values fall back to 1;
    results never depend on the cap, only wall-clock time does.
    """
    raw = os.environ.get(THREADS_ENV_VAR, "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def fmt_float(x: float) -> str:
    """Shortest round-trip decimal form, '' for None. Used by every CSV writer."""
    if x is None:
        return ""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        # numpy scalar
        obj = obj.item()
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return "nan"
    return obj


def json_dumps_stable(obj) -> str:
    """JSON text with sorted keys and no NaN/Infinity literals.

    Non-finite floats are encoded as the strings "inf", "-inf", "nan" so the
    output stays parseable by strict JSON readers. Output is byte-deterministic
    for equal inputs.
    """
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def parse_optional_float(text: str):
    """Inverse of fmt_float: None for empty cells, non-finite tokens honored."""
    text = text.strip()
    if not text:
        return None
    if text == "inf":
        return math.inf
    if text == "-inf":
        return -math.inf
    if text == "nan":
        return math.nan
    return float(text)


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
