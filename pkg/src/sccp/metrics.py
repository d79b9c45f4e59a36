"""Coverage, width and calibration-error summaries.

Sums go through ``math.fsum``, which is exactly rounded, so every aggregate
is independent of row order.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass(frozen=True)
class SliceStats:
    label: str
    coverage: float
    avg_width: float
    cal_error: float
    count: int
    n_infinite: int = 0
    n_empty: int = 0


@dataclass
class MetricsReport:
    coverage: float
    avg_width: float
    cal_error: float
    count: int
    n_infinite: int = 0
    n_empty: int = 0
    avg_set_measure: float | None = None
    by_group: dict[str, SliceStats] = field(default_factory=dict)
    by_bin: list[SliceStats] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["by_group"] = {k: asdict(v) for k, v in sorted(self.by_group.items())}
        d["by_bin"] = [asdict(s) for s in self.by_bin]
        return _clean(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["coverage", "avg_width", "cal_error", "count", "n_infinite", "n_empty"]
        w.writerow(["scope", "label"] + cols)
        overall = SliceStats("all", self.coverage, self.avg_width, self.cal_error,
                             self.count, self.n_infinite, self.n_empty)
        rows = [("overall", overall)]
        rows += [("group", s) for _, s in sorted(self.by_group.items())]
        rows += [("bin", s) for s in self.by_bin]
        for scope, s in rows:
            w.writerow([scope, s.label] + [_fmt(getattr(s, c)) for c in cols])
        return buf.getvalue()


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def _clean(obj):
    # JSON has no inf/nan
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean(v) for v in obj]
    return obj


def _mean(values) -> float:
    values = list(values)
    return math.fsum(values) / len(values) if values else math.nan


def covered(lower, upper, outcomes) -> np.ndarray:
    """Closed-interval coverage; an empty (NaN) interval covers nothing."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    y = np.asarray(outcomes, dtype=float)
    with np.errstate(invalid="ignore"):
        return (lower <= y) & (y <= upper)


def _slice(label, lower, upper, points, outcomes) -> SliceStats:
    cov = covered(lower, upper, outcomes)
    width = upper - lower
    empty = np.isnan(lower) | np.isnan(upper)
    inf = ~empty & ~np.isfinite(width)
    finite = ~empty & ~inf
    w = _mean(np.where(empty, 0.0, width)[~inf].tolist())
    return SliceStats(
        label=str(label),
        coverage=_mean(cov.astype(float).tolist()),
        avg_width=w if finite.any() or empty.any() else math.inf,
        cal_error=_mean((points - outcomes).tolist()),
        count=int(cov.size),
        n_infinite=int(inf.sum()),
        n_empty=int(empty.sum()),
    )


def _columns(intervals, points, outcomes):
    iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
    p = np.asarray(points, dtype=float).ravel()
    y = np.asarray(outcomes, dtype=float).ravel()
    if not (iv.shape[0] == p.size == y.size):
        raise ValueError("length mismatch")
    if y.size == 0:
        raise ValueError("empty input")
    return iv[:, 0], iv[:, 1], p, y


def score(intervals, points, outcomes, group=None, set_measures=None) -> MetricsReport:
    """Coverage, average width and mean signed error, overall and per group.

    Infinite-width intervals are excluded from the width average and counted
    in ``n_infinite``. Empty intervals contribute zero width and no coverage.
    """
    lo, hi, p, y = _columns(intervals, points, outcomes)
    overall = _slice("all", lo, hi, p, y)
    by_group = {}
    if group is not None:
        g = np.asarray([str(v) for v in group])
        if g.size != y.size:
            raise ValueError("length mismatch")
        for label in sorted(set(g.tolist())):
            m = g == label
            by_group[label] = _slice(label, lo[m], hi[m], p[m], y[m])
    measure = None
    if set_measures is not None:
        measure = _mean(np.asarray(set_measures, dtype=float).tolist())
    return MetricsReport(
        coverage=overall.coverage, avg_width=overall.avg_width,
        cal_error=overall.cal_error, count=overall.count,
        n_infinite=overall.n_infinite, n_empty=overall.n_empty,
        avg_set_measure=measure, by_group=by_group,
    )


def bin_by_quintile(values) -> np.ndarray:
    """Equal-frequency labels 1..5 by rank; ties keep input order."""
    v = np.asarray(values, dtype=float).ravel()
    n = v.size
    if n < 5:
        raise ValueError("need at least 5 values")
    ranks = np.empty(n, dtype=np.int64)
    ranks[np.argsort(v, kind="stable")] = np.arange(n)
    return ranks * 5 // n + 1


def conditional_coverage_by_prediction(segment_ids, intervals, outcomes, points=None) -> list[SliceStats]:
    """Coverage per calibrated-prediction segment; empty segments are omitted."""
    lo, hi, p, y = _columns(intervals, outcomes if points is None else points, outcomes)
    ids = np.asarray(segment_ids)
    if ids.size != y.size:
        raise ValueError("length mismatch")
    out = []
    for key in np.unique(ids):
        m = ids == key
        out.append(_slice(key, lo[m], hi[m], p[m], y[m]))
    return out
