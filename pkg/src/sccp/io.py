"""CSV tables and band JSON.

CSV files are UTF-8 with a header row and '.' decimals; floats are written
with ``repr`` so they round-trip exactly. JSON uses sorted keys.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .conformal import PredictionBand, nearest_index

BAND_FORMAT = "sccp-band/1"
PREDICTION_COLUMNS = ["id", "f_pred", "point", "lower", "upper", "range_low", "range_high"]


class InputError(ValueError):
    """Malformed input file."""


def read_table(path) -> tuple[list[str], list[dict]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        header = list(reader.fieldnames or [])
    return header, rows


def numeric_column(header, rows, name, path="input") -> np.ndarray:
    if name not in header:
        raise InputError(f"{path}: missing column {name!r}")
    out = np.empty(len(rows))
    for i, r in enumerate(rows):
        cell = r[name]
        try:
            out[i] = float(cell)
        except (TypeError, ValueError):
            raise InputError(f"{path}: non-numeric cell in column {name!r} at row {i + 1}: {cell!r}") from None
    return out


def write_table(path, header, rows) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_finite(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _finite(obj):
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def band_to_dict(b: PredictionBand) -> dict:
    rows = []
    for r in b.rows:
        rows.append(dict(
            fx=r.fx, point=r.point,
            lower=None if r.empty else r.lower,
            upper=None if r.empty else r.upper,
            empty=r.empty,
            range_low=r.multi.range_low, range_high=r.multi.range_high,
            set_measure=r.set_measure,
        ))
    return dict(
        format=BAND_FORMAT,
        config=asdict(b.config),
        grid_fx=b.grid_fx.tolist(),
        y_grid=dict(values=b.y_grid.values.tolist(), y_min=b.y_grid.y_min, y_max=b.y_grid.y_max),
        rows=rows,
    )


@dataclass
class BandTable:
    """A band read back from JSON; supports nearest-neighbour lookup."""

    grid_fx: np.ndarray
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    range_low: np.ndarray
    range_high: np.ndarray

    @classmethod
    def from_dict(cls, d: dict) -> "BandTable":
        if d.get("format") != BAND_FORMAT:
            raise InputError("not a band file")
        rows = d["rows"]

        def col(k):
            return np.array([math.nan if r[k] is None else r[k] for r in rows], dtype=float)

        grid = np.asarray(d["grid_fx"], dtype=float)
        if grid.size == 0 or grid.size != len(rows):
            raise InputError("band file has inconsistent rows")
        return cls(grid, col("point"), col("lower"), col("upper"), col("range_low"), col("range_high"))

    @classmethod
    def load(cls, path) -> "BandTable":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except (KeyError, json.JSONDecodeError) as exc:
            raise InputError(f"{path}: malformed band file ({exc})") from None

    def rows_for(self, fx) -> np.ndarray:
        return nearest_index(self.grid_fx, np.asarray(fx, dtype=float))
