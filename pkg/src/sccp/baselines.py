"""Split and prediction-binned Mondrian conformal prediction.

Both use the absolute residual score ``|y - f(x)|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SplitCpModel:
    radius: float
    n_cal: int
    alpha: float

    def interval(self, fx):
        return interval_at(self, fx)


@dataclass(frozen=True)
class MondrianCpModel:
    bin_edges: tuple[float, ...]
    per_bin_radius: tuple[float, ...]
    alpha: float

    def __post_init__(self):
        if len(self.per_bin_radius) != len(self.bin_edges) + 1:
            raise ValueError("need one radius per bin")

    @property
    def n_bins(self) -> int:
        return len(self.per_bin_radius)

    def bin_of(self, fx):
        return np.searchsorted(np.asarray(self.bin_edges), fx, side="right")

    def interval(self, fx):
        return interval_at(self, fx)


def conformal_rank(n: int, alpha: float) -> int:
    """``ceil((1 - alpha)(n + 1))``, robust to representation error in alpha."""
    return math.ceil((1.0 - alpha) * (n + 1) - 1e-10)


def _radius(scores: np.ndarray, alpha: float) -> float:
    k = conformal_rank(scores.size, alpha)
    if k > scores.size:
        return math.inf
    return float(np.partition(scores, k - 1)[k - 1])


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0,1)")


def fit_split_cp(cal_scores, alpha: float = 0.1) -> SplitCpModel:
    _check_alpha(alpha)
    s = np.asarray(cal_scores, dtype=float).ravel()
    if np.any(s < 0):
        raise ValueError("negative score")
    return SplitCpModel(_radius(s, alpha), s.size, alpha)


def equal_frequency_edges(values, n_bins: int) -> np.ndarray:
    """Interior edges splitting sorted ``values`` into equal-count bins.

    Each edge is the midpoint between the last value of one bin and the
    first of the next. Edges falling inside a run of ties collapse.
    """
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if n_bins <= 1 or v.size == 0:
        return np.empty(0)
    chunks = np.array_split(v, min(n_bins, v.size))
    edges = [0.5 * (a[-1] + b[0]) for a, b in zip(chunks[:-1], chunks[1:])]
    return np.unique(edges)


def fit_mondrian(cal, n_bins: int = 10, alpha: float = 0.1, bin_edges=None) -> MondrianCpModel:
    """Split CP within bins of the model prediction.

    Args:
        cal: Sequence of ``(prediction, score)`` pairs.
        n_bins: Number of equal-frequency bins; ignored with ``bin_edges``.
        alpha: Miscoverage level.
        bin_edges: Optional explicit interior edges on the prediction axis.
    """
    _check_alpha(alpha)
    arr = np.asarray(cal, dtype=float).reshape(-1, 2)
    pred, scores = arr[:, 0], arr[:, 1]
    if np.any(scores < 0):
        raise ValueError("negative score")
    if bin_edges is None:
        if n_bins < 1:
            raise ValueError("n_bins must be at least 1")
        edges = equal_frequency_edges(pred, n_bins)
    else:
        edges = np.asarray(bin_edges, dtype=float)
        if np.any(np.diff(edges) <= 0):
            raise ValueError("bin_edges must be strictly increasing")
    idx = np.searchsorted(edges, pred, side="right")
    radii = tuple(_radius(scores[idx == b], alpha) for b in range(edges.size + 1))
    return MondrianCpModel(tuple(edges.tolist()), radii, alpha)


def interval_at(model: SplitCpModel | MondrianCpModel, fx):
    """``fx -/+ radius``; infinite radius gives ``(-inf, inf)``."""
    fx = np.asarray(fx, dtype=float)
    if isinstance(model, MondrianCpModel):
        r = np.asarray(model.per_bin_radius)[model.bin_of(fx)]
    else:
        r = np.full(fx.shape, model.radius)
    lo, hi = fx - r, fx + r
    if fx.ndim == 0:
        return float(lo), float(hi)
    return lo, hi
