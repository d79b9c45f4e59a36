"""Venn-Abers calibration for regression.

For a test prediction ``fx`` and each imputed outcome ``y``, the calibration
set is augmented with ``(fx, y)`` and refit isotonically. The fitted value at
``fx`` over all ``y`` is the multi-prediction; its range comes from the fits
at the outcome-range endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .isotonic import DEFAULT_MIN_SEGMENT_MASS, _pava_blocks, pool_ties


def equal_frequency_representatives(values, bins: int) -> np.ndarray:
    """Median of each of ``bins`` equal-count groups of the sorted values.

    Duplicate representatives are dropped, so fewer than ``bins`` points may
    come back.
    """
    if bins < 1:
        raise ValueError("bins must be positive")
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("empty sample")
    chunks = np.array_split(v, min(bins, v.size))
    return np.unique([np.median(c) for c in chunks])


@dataclass(frozen=True)
class OutcomeGrid:
    values: np.ndarray
    y_min: float
    y_max: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "values", values)
        if values.size == 0:
            raise ValueError("outcome grid is empty")
        if not np.all(np.isfinite(values)) or not (
                np.isfinite(self.y_min) and np.isfinite(self.y_max)):
            raise ValueError("non-finite input")
        if values.size < 2 and not (self.y_min == self.y_max == values[0]):
            raise ValueError("outcome grid needs at least 2 values")
        if np.any(np.diff(values) <= 0):
            raise ValueError("outcome grid must be strictly increasing")
        if self.y_min > values[0] or self.y_max < values[-1]:
            raise ValueError("outcome grid must lie within [y_min, y_max]")

    @classmethod
    def from_outcomes(cls, outcomes, bins: int = 200) -> "OutcomeGrid":
        y = np.asarray(outcomes, dtype=float)
        return cls(equal_frequency_representatives(y, bins),
                   float(y.min()), float(y.max()))


@dataclass(frozen=True)
class MultiPrediction:
    grid: np.ndarray
    predictions: np.ndarray
    range_low: float
    range_high: float

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.range_low + self.range_high)

    @property
    def width(self) -> float:
        return self.range_high - self.range_low

    @property
    def per_y(self) -> list[tuple[float, float]]:
        return list(zip(self.grid.tolist(), self.predictions.tolist()))


class CalibrationData:
    """Calibration pairs sorted and pooled by prediction, ready for scans."""

    def __init__(self, predictions, outcomes):
        pred = np.asarray(predictions, dtype=float).ravel()
        y = np.asarray(outcomes, dtype=float).ravel()
        if pred.size == 0:
            raise ValueError("empty calibration set")
        if pred.shape != y.shape:
            raise ValueError("predictions and outcomes must have equal length")
        if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(y))):
            raise ValueError("non-finite input")
        self.predictions = pred
        self.outcomes = y
        self.positions, self.sw, self.swy, order = pool_ties(pred, y)
        self.sorted_outcomes = y[order]
        starts = np.concatenate([[0], np.cumsum(self.sw)]).astype(np.int64)
        self.pool_starts = starts

    def __len__(self) -> int:
        return self.predictions.size

    @property
    def mean_outcome(self) -> float:
        return float(self.outcomes.mean())

    def locate(self, fx: float) -> tuple[int, bool]:
        """Pool index where ``fx`` is inserted, and whether it ties a pool."""
        if not np.isfinite(fx):
            raise ValueError("non-finite input")
        p = int(np.searchsorted(self.positions, fx))
        tie = p < self.positions.size and self.positions[p] == fx
        return p, tie

    def scan(self, fx: float, ys, min_segment_mass: float, alpha: float = 0.5):
        """Run the augmented fit at ``fx`` for every outcome in ``ys``."""
        p, tie = self.locate(fx)
        return _augmented_scan(
            self.sw, self.swy, self.pool_starts, self.sorted_outcomes,
            p, tie, np.asarray(ys, dtype=float), float(min_segment_mass),
            float(alpha))


@njit(cache=True, nogil=True)
def _augmented_scan(sw, swy, pool_starts, y_sorted, p, tie, ys, min_mass, alpha):
    """Per imputed outcome: fitted value at fx, level-set quantile, own score.

    ``lo[j]:hi[j]`` indexes the calibration points (in sorted order) sharing
    the fx segment for ``ys[j]``.
    """
    n_pool = sw.shape[0]
    m_aug = n_pool if tie else n_pool + 1
    aw = np.empty(m_aug)
    awy = np.empty(m_aug)
    n_y = ys.shape[0]
    pred = np.empty(n_y)
    rho = np.empty(n_y)
    score = np.empty(n_y)
    lo = np.empty(n_y, np.int64)
    hi = np.empty(n_y, np.int64)
    for j in range(n_y):
        y = ys[j]
        if tie:
            aw[:] = sw
            awy[:] = swy
            aw[p] += 1.0
            awy[p] += y
        else:
            aw[:p] = sw[:p]
            awy[:p] = swy[:p]
            aw[p] = 1.0
            awy[p] = y
            aw[p + 1:] = sw[p:]
            awy[p + 1:] = swy[p:]
        ends, w, wy = _pava_blocks(aw, awy, min_mass)
        b = np.searchsorted(ends, p, side="right")
        v = wy[b] / w[b]
        a_lo = 0 if b == 0 else ends[b - 1]
        a_hi = ends[b]
        c_lo = a_lo
        c_hi = a_hi if tie else a_hi - 1
        i0 = pool_starts[c_lo]
        i1 = pool_starts[c_hi]
        m = i1 - i0 + 1
        s = np.empty(m)
        for i in range(i0, i1):
            s[i - i0] = abs(y_sorted[i] - v)
        s_new = abs(y - v)
        s[m - 1] = s_new
        k = int(np.ceil((1.0 - alpha) * m - 1e-10))
        if k < 1:
            k = 1
        if k > m:
            k = m
        s.sort()
        pred[j] = v
        rho[j] = s[k - 1]
        score[j] = s_new
        lo[j] = i0
        hi[j] = i1
    return pred, rho, score, lo, hi


def multipredict(
    cal,
    fx: float,
    grid: OutcomeGrid,
    min_segment_mass: float = DEFAULT_MIN_SEGMENT_MASS,
) -> MultiPrediction:
    """Venn-Abers multi-prediction at the raw prediction ``fx``.

    Args:
        cal: ``CalibrationData`` or a sequence of ``(prediction, outcome)``.
        fx: Raw model prediction for the test context.
        grid: Imputed outcomes and the outcome range.
        min_segment_mass: Minimum segment mass for every augmented fit.
    """
    if not isinstance(cal, CalibrationData):
        cal = _as_calibration(cal)
    pred = cal.scan(fx, grid.values, min_segment_mass)[0]
    ends = cal.scan(fx, np.array([grid.y_min, grid.y_max]), min_segment_mass)[0]
    return MultiPrediction(grid.values.copy(), pred, float(ends[0]), float(ends[1]))


def derived_point(mp: MultiPrediction, y_bar: float, y_min: float, y_max: float) -> float:
    """Shrink the multi-prediction midpoint towards ``y_bar``.

    The shrinkage weight is the range width relative to the outcome range.
    """
    if not y_max > y_min:
        raise ValueError("degenerate outcome range")
    mid = mp.midpoint
    return mid + (mp.range_high - mp.range_low) / (y_max - y_min) * (y_bar - mid)


def _as_calibration(cal) -> CalibrationData:
    arr = np.asarray(cal, dtype=float)
    if arr.size == 0:
        raise ValueError("empty calibration set")
    arr = arr.reshape(-1, 2)
    return CalibrationData(arr[:, 0], arr[:, 1])
