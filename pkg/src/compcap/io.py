"""CSV and JSON artifacts.  Floats are written with 17 significant digits."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .domain import Grid

FIELD_COLUMNS = ("row", "col", "x", "y")


class FormatError(ValueError):
    pass


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def write_field(path, grid: Grid, values: np.ndarray, name: str) -> None:
    values = np.asarray(values, dtype=float)
    rows = zip(grid.ij[:, 0], grid.ij[:, 1], grid.centers[:, 0], grid.centers[:, 1], values)
    write_table(path, (*FIELD_COLUMNS, name), rows)


def read_field(path, grid: Grid, name: str = "v") -> np.ndarray:
    """Read a field CSV written by :func:`write_field` back into grid order."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            body = list(reader)
    except OSError as exc:
        raise FormatError(f"cannot read field file {path}: {exc}") from exc
    if header is None:
        raise FormatError(f"{path}: empty file")
    header = [h.strip() for h in header]
    missing = [c for c in ("row", "col", name) if c not in header]
    if missing:
        raise FormatError(f"{path}: missing column(s) {', '.join(missing)}; header is {header}")
    ir, ic, iv = header.index("row"), header.index("col"), header.index(name)
    out = np.full(grid.n_cells, np.nan)
    for lineno, rec in enumerate(body, 2):
        if not rec:
            continue
        try:
            r, c, val = int(rec[ir]), int(rec[ic]), float(rec[iv])
        except (ValueError, IndexError) as exc:
            raise FormatError(f"{path}:{lineno}: malformed record {rec}") from exc
        if not (0 <= r < grid.shape[0] and 0 <= c < grid.shape[1]) or grid.index[r, c] < 0:
            raise FormatError(f"{path}:{lineno}: cell ({r}, {c}) is not an inside cell of the grid")
        out[grid.index[r, c]] = val
    if np.any(np.isnan(out)):
        raise FormatError(f"{path}: {int(np.isnan(out).sum())} inside cells have no value")
    return out


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no inf/nan
        return x if math.isfinite(x) else str(x)
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")
