"""Self-calibrating conformal prediction.

Conformity scores are absolute residuals against the Venn-Abers augmented
fit, and the threshold for each imputed outcome is a quantile over the
calibration points that share the test point's fitted segment.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._parallel import parallel_map
from .isotonic import DEFAULT_MIN_SEGMENT_MASS
from .venn_abers import (
    CalibrationData,
    MultiPrediction,
    OutcomeGrid,
    derived_point,
    equal_frequency_representatives,
)


class EmptyIntervalWarning(UserWarning):
    """No imputed outcome on the grid was accepted."""


@dataclass(frozen=True)
class SccpConfig:
    alpha: float = 0.1
    y_grid_bins: int = 200
    pred_grid_bins: int = 200
    min_segment_mass: float = DEFAULT_MIN_SEGMENT_MASS
    jitter: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0,1)")
        if self.y_grid_bins < 2:
            raise ValueError("y_grid_bins must be at least 2")
        if self.pred_grid_bins < 1:
            raise ValueError("pred_grid_bins must be at least 1")
        if self.min_segment_mass < 0:
            raise ValueError("min_segment_mass must be nonnegative")
        if self.jitter < 0:
            raise ValueError("jitter must be nonnegative")


@dataclass
class SccpOutput:
    fx: float
    multi: MultiPrediction
    point: float
    y_grid: np.ndarray
    quantiles: np.ndarray  # threshold per grid outcome
    scores: np.ndarray  # test-point score per grid outcome
    level_start: np.ndarray  # fx segment as a range of position-sorted calibration points
    level_stop: np.ndarray
    interval: tuple[float, float] | None
    set_measure: float

    @property
    def accepted(self) -> np.ndarray:
        return self.scores <= self.quantiles

    @property
    def accepted_y(self) -> np.ndarray:
        return self.y_grid[self.accepted]

    @property
    def per_y_quantile(self) -> list[tuple[float, float]]:
        return list(zip(self.y_grid.tolist(), self.quantiles.tolist()))

    @property
    def level_sizes(self) -> np.ndarray:
        return self.level_stop - self.level_start

    @property
    def empty(self) -> bool:
        return self.interval is None

    @property
    def lower(self) -> float:
        return math.nan if self.interval is None else self.interval[0]

    @property
    def upper(self) -> float:
        return math.nan if self.interval is None else self.interval[1]


def level_set_quantile(scores, augmented_score: float, alpha: float) -> float:
    """Smallest minimiser of the summed pinball loss over ``scores`` plus one.

    This is the ``ceil((1 - alpha) * m)``-th smallest value of the multiset,
    with ``m`` counting the augmented score.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0,1)")
    s = np.append(np.asarray(scores, dtype=float).ravel(), float(augmented_score))
    if not np.all(np.isfinite(s)):
        raise ValueError("non-finite score")
    m = s.size
    k = min(max(math.ceil((1.0 - alpha) * m - 1e-10), 1), m)
    return float(np.partition(s, k - 1)[k - 1])


def _root(y0, y1, d0, d1):
    # zero of the line through (y0, d0), (y1, d1); d0, d1 have opposite signs
    return y1 - (y1 - y0) * d1 / (d1 - d0)


def accepted_hull(y_grid, quantiles, scores):
    """Hull of accepted outcomes under linear interpolation in ``y``.

    Returns ``(interval, set_measure)`` with ``interval`` None when nothing on
    the grid is accepted.
    """
    d = np.asarray(quantiles) - np.asarray(scores)
    ok = np.flatnonzero(d >= 0)
    if ok.size == 0:
        return None, 0.0
    i, j = ok[0], ok[-1]
    lower = y_grid[i] if i == 0 else _root(y_grid[i - 1], y_grid[i], d[i - 1], d[i])
    upper = y_grid[j] if j == d.size - 1 else _root(y_grid[j], y_grid[j + 1], d[j], d[j + 1])

    measure = 0.0
    for k in range(d.size - 1):
        a, b = d[k], d[k + 1]
        h = y_grid[k + 1] - y_grid[k]
        if a >= 0 and b >= 0:
            measure += h
        elif a >= 0 or b >= 0:
            measure += h * max(a, b) / abs(b - a)
    return (float(lower), float(upper)), float(measure)


def prepare_calibration(predictions, outcomes, cfg: SccpConfig) -> CalibrationData:
    """Validate calibration pairs and apply the optional outcome jitter."""
    y = np.asarray(outcomes, dtype=float)
    if cfg.jitter > 0:
        rng = np.random.default_rng(cfg.seed)
        y = y + rng.uniform(-cfg.jitter, cfg.jitter, size=y.shape)
    return CalibrationData(predictions, y)


def _as_calibration(cal, cfg: SccpConfig) -> CalibrationData:
    if isinstance(cal, CalibrationData):
        return cal
    arr = np.asarray(cal, dtype=float)
    if arr.size == 0:
        raise ValueError("empty calibration set")
    arr = arr.reshape(-1, 2)
    return prepare_calibration(arr[:, 0], arr[:, 1], cfg)


def predict(
    cal,
    fx: float,
    cfg: SccpConfig = SccpConfig(),
    y_grid: OutcomeGrid | None = None,
    y_bar: float | None = None,
) -> SccpOutput:
    """Self-calibrated interval and calibrated point prediction at ``fx``.

    Args:
        cal: ``CalibrationData`` or a sequence of ``(prediction, outcome)``.
        fx: Raw model prediction for the test context.
        cfg: Method configuration.
        y_grid: Imputed outcomes; defaults to equal-frequency representatives
            of the calibration outcomes.
        y_bar: Reference prediction the point is shrunk towards; defaults to
            the calibration outcome mean.
    """
    cal = _as_calibration(cal, cfg)
    if y_grid is None:
        y_grid = OutcomeGrid.from_outcomes(cal.outcomes, cfg.y_grid_bins)
    fx = float(fx)
    pred, rho, score, lo, hi = cal.scan(fx, y_grid.values, cfg.min_segment_mass, cfg.alpha)
    ends = cal.scan(fx, np.array([y_grid.y_min, y_grid.y_max]), cfg.min_segment_mass)[0]
    multi = MultiPrediction(y_grid.values, pred, float(ends[0]), float(ends[1]))
    if y_bar is None:
        y_bar = cal.mean_outcome
    if y_grid.y_max > y_grid.y_min:
        point = derived_point(multi, y_bar, y_grid.y_min, y_grid.y_max)
    else:
        point = multi.midpoint
    interval, measure = accepted_hull(y_grid.values, rho, score)
    if interval is None:
        warnings.warn(f"empty prediction set at fx={fx!r}", EmptyIntervalWarning, stacklevel=2)
    return SccpOutput(
        fx=fx, multi=multi, point=float(point), y_grid=y_grid.values,
        quantiles=rho, scores=score, level_start=lo, level_stop=hi,
        interval=interval, set_measure=measure,
    )


@dataclass
class PredictionBand:
    grid_fx: np.ndarray
    rows: list[SccpOutput]
    y_grid: OutcomeGrid
    config: SccpConfig = field(default_factory=SccpConfig)

    def __post_init__(self):
        self.grid_fx = np.asarray(self.grid_fx, dtype=float)
        if len(self.rows) != self.grid_fx.size:
            raise ValueError("one row per grid point required")
        if np.any(np.diff(self.grid_fx) <= 0):
            raise ValueError("grid_fx must be strictly increasing")

    def __len__(self) -> int:
        return len(self.rows)

    def nearest_index(self, fx):
        return nearest_index(self.grid_fx, fx)

    def lookup(self, fx: float) -> SccpOutput:
        return self.rows[int(self.nearest_index(fx))]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


def nearest_index(grid, fx):
    """Index of the nearest grid point; exact ties go to the left."""
    grid = np.asarray(grid, dtype=float)
    x = np.asarray(fx, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    right = np.clip(np.searchsorted(grid, x), 1, max(grid.size - 1, 1))
    left = right - 1
    if grid.size == 1:
        idx = np.zeros_like(right)
    else:
        idx = np.where(x - grid[left] <= grid[right] - x, left, right)
    return int(idx) if idx.ndim == 0 else idx


def band(
    cal,
    cfg: SccpConfig = SccpConfig(),
    threads: int | None = None,
    y_grid: OutcomeGrid | None = None,
    grid_fx=None,
) -> PredictionBand:
    """Run ``predict`` over a grid of raw predictions.

    The default grid holds equal-frequency representatives of the calibration
    predictions, and the default outcome grid is built the same way.
    """
    cal = _as_calibration(cal, cfg)
    if len(cal) < 2:
        raise ValueError("band needs at least 2 calibration points")
    if y_grid is None:
        y_grid = OutcomeGrid.from_outcomes(cal.outcomes, cfg.y_grid_bins)
    if grid_fx is None:
        grid_fx = equal_frequency_representatives(cal.predictions, cfg.pred_grid_bins)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyIntervalWarning)
        rows = parallel_map(lambda fx: predict(cal, fx, cfg, y_grid), list(grid_fx), threads)
    n_empty = sum(r.empty for r in rows)
    if n_empty:
        warnings.warn(f"{n_empty} band rows have an empty prediction set",
                      EmptyIntervalWarning, stacklevel=2)
    return PredictionBand(np.asarray(grid_fx, dtype=float), rows, y_grid, cfg)
