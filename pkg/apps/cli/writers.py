"""
Deterministic CSV and JSON output. Floats use the shortest round-trip
representation; masked (NaN) cells are written as empty CSV fields and as
null in JSON.
"""

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, List, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def format_number(value: float) -> str:
    value = float(value)
    if math.isnan(value):
        return ""
    return repr(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(value) for value in row])
            count += 1
    logger.info(f"Wrote {path} ({count} rows)")
    return count


def grid_rows(xs: np.ndarray, ys: np.ndarray, Z: np.ndarray):
    """(x, y, Z[j, i]) rows, x varying fastest"""
    for j, y in enumerate(ys):
        for i, x in enumerate(xs):
            yield (x, y, Z[j, i])


def to_jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return None if math.isnan(value) or math.isinf(value) else value
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def dumps(data: Any) -> str:
    return json.dumps(to_jsonable(data), indent=2, allow_nan=False) + "\n"


def write_json(path: Path, data: Any) -> None:
    path.write_text(dumps(data), encoding="utf-8")
    logger.info(f"Wrote {path}")


def polylines_payload(levels: Sequence[float], curves: Sequence[Sequence[np.ndarray]]) -> List[dict]:
    """adiabats.json body: one entry per level, in request order"""
    return [
        {
            "level": float(level),
            "polylines": [np.asarray(polyline, dtype=float).tolist() for polyline in polylines],
        }
        for level, polylines in zip(levels, curves)
    ]
