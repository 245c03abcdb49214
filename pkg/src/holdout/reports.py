"""Atomic JSON/CSV report writers and table builders."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .curves import BoundMode, LossCurve, utility_profile
from .optimizer import ParetoPoint


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no inf/nan; keep them readable as strings
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False) + "\n"


def write_json(path: str | Path, obj) -> None:
    _atomic_write(path, dumps_json(obj))


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def dumps_csv(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    rows = list(rows)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path: str | Path, rows: Sequence[dict], columns: Sequence[str] | None = None) -> None:
    _atomic_write(path, dumps_csv(rows, columns))


CURVE_COLUMNS = ("sigma2", "m", "E", "V", "negative_utility")
FRONTIER_COLUMNS = ("sigma2", "m_star", "implied_K", "feasible")


def curve_table(curve: LossCurve, sigma2_values: Iterable[float], mode: BoundMode) -> list[dict]:
    """One row per (sigma2, m); V and negative utility are blank where E < 0."""
    rows = []
    for s in sigma2_values:
        m, E, V, U = utility_profile(curve, float(s), mode)
        for mi, e, v, u in zip(m.tolist(), E.tolist(), V.tolist(), U.tolist()):
            ok = math.isfinite(v)
            rows.append(
                {"sigma2": float(s), "m": mi, "E": e, "V": v if ok else None,
                 "negative_utility": u if ok else None}
            )
    return rows


def frontier_table(points: Sequence[ParetoPoint]) -> list[dict]:
    return [
        {"sigma2": p.sigma2, "m_star": p.m_star, "implied_K": p.implied_K, "feasible": p.feasible}
        for p in points
    ]
