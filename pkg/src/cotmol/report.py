"""Deterministic JSON and CSV serialization of analysis results."""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
import json
import math
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

SIG_DIGITS = 12


def _float(x: float) -> float | None:
    if not math.isfinite(x):
        return None
    return float(f"{x:.{SIG_DIGITS}g}")


def normalize(obj: Any) -> Any:
    """Plain JSON-ready structure: 12-significant-digit floats, NaN/inf as None."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, enum.Enum):
        return normalize(obj.value)
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, np.bool_):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, np.ndarray):
        return normalize(obj.tolist())
    if hasattr(obj, "to_json"):
        return normalize(obj.to_json())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return normalize({f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)})
    if isinstance(obj, Mapping):
        return {str(k): normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_json_bytes(results: Any) -> bytes:
    return (json.dumps(normalize(results), indent=2, ensure_ascii=False, allow_nan=False) + "\n").encode("utf-8")


def _cell(v: Any) -> str:
    v = normalize(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.{SIG_DIGITS}g}"
    if isinstance(v, (list, dict)):
        return json.dumps(v, separators=(",", ":"), ensure_ascii=False)
    return str(v)


def to_csv_bytes(rows: Iterable[Mapping], fieldnames: Sequence[str] | None = None) -> bytes:
    """RFC-4180 CSV (CRLF line endings, minimal quoting).

    Columns are ``fieldnames`` or the keys of the rows in first-seen order;
    with no rows the output is the header alone.
    """
    rows = list(rows)
    if fieldnames is None:
        seen: dict[str, None] = {}
        for r in rows:
            for k in r:
                seen.setdefault(k, None)
        fieldnames = list(seen)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    if fieldnames:
        w.writerow(fieldnames)
    for r in rows:
        w.writerow([_cell(r.get(k)) for k in fieldnames])
    return buf.getvalue().encode("utf-8")


def report(results: Any, fmt: str = "json", fieldnames: Sequence[str] | None = None) -> bytes:
    if fmt == "json":
        return to_json_bytes(results)
    if fmt == "csv":
        return to_csv_bytes(results, fieldnames)
    raise ValueError(f"unknown report format {fmt!r}")
