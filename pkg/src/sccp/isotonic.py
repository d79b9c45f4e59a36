"""Weighted isotonic regression on a 1-D prediction axis.

The fit is a nondecreasing step function of the prediction. Samples sharing
a position are pooled before fitting, so they always land in one segment.
An optional minimum segment mass is met by the least-squares coarsening of the
pool-adjacent-violators blocks.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit

DEFAULT_MIN_SEGMENT_MASS = 20.0


class WeightedSample(NamedTuple):
    position: float
    outcome: float
    weight: float = 1.0


@njit(cache=True, nogil=True)
def _pava_blocks(sw, swy, min_mass):
    """Block partition of pooled, position-sorted data.

    Returns ``(ends, w, wy)`` where block ``k`` covers pools
    ``ends[k-1]:ends[k]`` (``ends[-1]`` taken as 0).
    """
    n = sw.shape[0]
    ends = np.empty(n, np.int64)
    w = np.empty(n)
    wy = np.empty(n)
    k = 0
    for i in range(n):
        ends[k] = i + 1
        w[k] = sw[i]
        wy[k] = swy[i]
        k += 1
        # merge on ties too: fitted block values end up strictly increasing
        while k > 1 and (
            w[k - 2] == 0.0 or w[k - 1] == 0.0
            or wy[k - 2] * w[k - 1] >= wy[k - 1] * w[k - 2]
        ):
            w[k - 2] += w[k - 1]
            wy[k - 2] += wy[k - 1]
            ends[k - 2] = ends[k - 1]
            k -= 1

    if min_mass > 0.0 and k > 1:
        k = _merge_blocks(ends, w, wy, k, min_mass)
    return ends[:k], w[:k], wy[:k]


@njit(cache=True, nogil=True)
def _merge_blocks(ends, w, wy, k, min_mass):
    """Coarsen PAVA blocks in place into runs of mass >= min_mass.

    Chooses the coarsening with the smallest SSE by dynamic programming; any
    coarsening of a monotone block sequence is itself monotone. A run that can
    be cut into two runs that both meet the mass is never optimal, which
    bounds the inner loop. Near-ties go to the shortest last run.
    Returns the new block count.
    """
    total = 0.0
    wy_total = 0.0
    for b in range(k):
        total += w[b]
        wy_total += wy[b]
    if total < 2.0 * min_mass:
        ends[0] = ends[k - 1]
        w[0] = total
        wy[0] = wy_total
        return 1
    mu0 = wy_total / total
    cw = np.zeros(k + 1)
    cs = np.zeros(k + 1)
    cq = np.zeros(k + 1)
    for b in range(k):
        d = wy[b] / w[b] - mu0
        cw[b + 1] = cw[b] + w[b]
        cs[b + 1] = cs[b] + w[b] * d
        cq[b + 1] = cq[b] + w[b] * d * d
    tol = 1e-12 * cq[k]
    dp = np.full(k + 1, np.inf)
    arg = np.zeros(k + 1, np.int64)
    dp[0] = 0.0
    c = -1  # largest cut below j leaving a suffix of mass >= min_mass
    for j in range(1, k + 1):
        while c + 1 < j and cw[j] - cw[c + 1] >= min_mass:
            c += 1
        for i in range(j - 1, -1, -1):
            if c > i and cw[c] - cw[i] >= min_mass:
                break
            run = cw[j] - cw[i]
            if run < min_mass or dp[i] == np.inf:
                continue
            s = cs[j] - cs[i]
            cost = dp[i] + (cq[j] - cq[i]) - s * s / run
            if cost < dp[j] - tol:
                dp[j] = cost
                arg[j] = i
    # backtrack, then compact runs to the front
    n_runs = 0
    j = k
    cuts = np.empty(k + 1, np.int64)
    while j > 0:
        cuts[n_runs] = j
        n_runs += 1
        j = arg[j]
    lo = 0
    for r in range(n_runs):
        hi = cuts[n_runs - 1 - r]
        rw = 0.0
        rwy = 0.0
        for b in range(lo, hi):
            rw += w[b]
            rwy += wy[b]
        w[r] = rw
        wy[r] = rwy
        ends[r] = ends[hi - 1]
        lo = hi
    return n_runs


def pool_ties(positions, outcomes, weights=None):
    """Sort by position and pool equal positions.

    Returns unique positions, pooled weights, pooled weighted outcome sums and
    the permutation that sorts the input.
    """
    positions = np.asarray(positions, dtype=float)
    outcomes = np.asarray(outcomes, dtype=float)
    if weights is None:
        weights = np.ones_like(positions)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(positions, kind="stable")
    pos = positions[order]
    uniq, start = np.unique(pos, return_index=True)
    sw = np.add.reduceat(weights[order], start)
    swy = np.add.reduceat((weights * outcomes)[order], start)
    return uniq, sw, swy, order


@dataclass(frozen=True)
class IsotonicFit:
    """Monotone step function over the prediction axis.

    ``segment_values[k]`` applies on ``[breakpoints[k-1], breakpoints[k])``
    with constant extrapolation at both ends.
    """

    breakpoints: tuple[float, ...]
    segment_values: tuple[float, ...]
    segment_masses: tuple[float, ...]

    @property
    def n_segments(self) -> int:
        return len(self.segment_values)

    def segment_index(self, t: float) -> int:
        if not np.isfinite(t):
            raise ValueError("non-finite input")
        return bisect_right(self.breakpoints, t)

    def __call__(self, t):
        return evaluate_step(self, t)


def _check_inputs(positions, outcomes, weights):
    if positions.size == 0:
        raise ValueError("empty sample")
    if positions.shape != outcomes.shape or positions.shape != weights.shape:
        raise ValueError("positions, outcomes and weights must have equal length")
    if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(outcomes))
            and np.all(np.isfinite(weights))):
        raise ValueError("non-finite input")
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    if not np.any(weights > 0):
        raise ValueError("at least one weight must be positive")


def fit_isotonic(
    positions: Sequence[float] | np.ndarray | Sequence[WeightedSample],
    outcomes: Sequence[float] | np.ndarray | None = None,
    weights: Sequence[float] | np.ndarray | None = None,
    min_segment_mass: float = DEFAULT_MIN_SEGMENT_MASS,
) -> IsotonicFit:
    """Least-squares nondecreasing step function of ``outcomes`` on ``positions``.

    Args:
        positions: Prediction values, or a sequence of ``WeightedSample`` when
            ``outcomes`` is omitted.
        outcomes: Observed outcomes.
        weights: Nonnegative sample weights, default 1.
        min_segment_mass: Every segment carries at least this much weight.
            When the total weight is below twice this value the result is a
            single segment.

    Returns:
        The fitted ``IsotonicFit``.
    """
    if outcomes is None:
        samples = list(positions)
        if not samples:
            raise ValueError("empty sample")
        positions = [s.position for s in samples]
        outcomes = [s.outcome for s in samples]
        weights = [s.weight for s in samples]
    positions = np.asarray(positions, dtype=float).ravel()
    outcomes = np.asarray(outcomes, dtype=float).ravel()
    weights = (np.ones_like(positions) if weights is None
               else np.asarray(weights, dtype=float).ravel())
    _check_inputs(positions, outcomes, weights)
    if min_segment_mass < 0 or not np.isfinite(min_segment_mass):
        raise ValueError("min_segment_mass must be a finite nonnegative number")

    uniq, sw, swy, _ = pool_ties(positions, outcomes, weights)
    ends, w, wy = _pava_blocks(sw, swy, float(min_segment_mass))
    return _fit_from_blocks(uniq, ends, w, wy)


def _fit_from_blocks(uniq, ends, w, wy) -> IsotonicFit:
    values = np.empty(len(w))
    pos = w > 0
    values[pos] = wy[pos] / w[pos]
    # a zero-mass block can only survive when all mass is zero; excluded upstream
    values[~pos] = 0.0
    cut = ends[:-1]
    left, right = uniq[cut - 1], uniq[cut]
    breaks = 0.5 * left + 0.5 * right
    # adjacent floats: the midpoint can round onto the left position
    breaks = np.where(breaks > left, breaks, right)
    return IsotonicFit(
        breakpoints=tuple(breaks.tolist()),
        segment_values=tuple(values.tolist()),
        segment_masses=tuple(w.tolist()),
    )


def evaluate_step(fit: IsotonicFit, t):
    """Evaluate the step function at a scalar or array of predictions."""
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite input")
    idx = np.searchsorted(np.asarray(fit.breakpoints), arr, side="right")
    out = np.asarray(fit.segment_values)[idx]
    if arr.ndim == 0:
        return float(out)
    return out
