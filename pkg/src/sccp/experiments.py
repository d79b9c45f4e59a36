"""Desk-scale simulation studies on the synthetic law.

Everything here is seeded and returns plain rows, so reruns with any worker
count give identical tables.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import norm

from ._parallel import parallel_map
from .baselines import fit_mondrian, fit_split_cp, interval_at
from .conformal import EmptyIntervalWarning, SccpConfig, band, predict, prepare_calibration
from .isotonic import fit_isotonic
from .metrics import bin_by_quintile, score
from .synth import SynthConfig, gaussian_interval, generate, make_predictor, oracle_mu, oracle_sigma2


def _split_data(setup: SynthConfig, n: int, split: str, seed: int):
    return generate(replace(setup, n=n, seed=seed), split)


@dataclass
class CoverageRun:
    """Per-test-point results pooled over replicates."""

    replicate: np.ndarray
    covered: np.ndarray
    expected_coverage: np.ndarray  # coverage probability under the true Gaussian law
    width: np.ndarray
    segment_value: np.ndarray  # calibration-only isotonic fit at the test prediction
    oracle_segment_value: np.ndarray  # fit augmented with the true outcome

    @property
    def coverage(self) -> float:
        return float(self.covered.mean())


def _coverage_replicate(r, setup, n_cal, n_test, cfg, predictor, seed):
    cal = _split_data(setup, n_cal, "cal", seed + r)
    test = _split_data(setup, n_test, "test", seed + r)
    f_cal = predictor(cal.features)
    f_test = np.atleast_1d(predictor(test.features))
    data = prepare_calibration(f_cal, cal.outcomes, cfg)
    base_fit = fit_isotonic(f_cal, data.outcomes, min_segment_mass=cfg.min_segment_mass)
    mu = np.atleast_1d(oracle_mu(test.features))
    sd = np.sqrt(np.atleast_1d(oracle_sigma2(test.features, setup.a, setup.b)))
    rows = []
    for i in range(n_test):
        out = predict(data, f_test[i], cfg)
        lo, hi = out.lower, out.upper
        y = test.outcomes[i]
        if out.empty:
            cov, exp_cov, width = False, 0.0, 0.0
        else:
            cov = lo <= y <= hi
            exp_cov = norm.cdf((hi - mu[i]) / sd[i]) - norm.cdf((lo - mu[i]) / sd[i])
            width = hi - lo
        oracle_seg = data.scan(f_test[i], np.array([y]), cfg.min_segment_mass)[0][0]
        rows.append((r, cov, exp_cov, width, base_fit(f_test[i]), oracle_seg))
    return rows


def coverage_run(
    setup: SynthConfig,
    n_cal: int,
    replicates: int,
    n_test: int = 1,
    cfg: SccpConfig = SccpConfig(),
    predictor: str = "oracle",
    seed: int = 0,
    threads: int | None = None,
    **predictor_params,
) -> CoverageRun:
    """SC-CP at fresh test points, one calibration set per replicate.

    Each test point gets a direct (grid-free in prediction space) run, so the
    only approximation is the outcome grid.
    """
    f = make_predictor(setup, predictor, **predictor_params)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyIntervalWarning)
        chunks = parallel_map(
            lambda r: _coverage_replicate(r, setup, n_cal, n_test, cfg, f, seed),
            list(range(replicates)), threads)
    arr = [row for chunk in chunks for row in chunk]
    cols = list(zip(*arr))
    return CoverageRun(
        replicate=np.array(cols[0], dtype=np.int64),
        covered=np.array(cols[1], dtype=bool),
        expected_coverage=np.array(cols[2], dtype=float),
        width=np.array(cols[3], dtype=float),
        segment_value=np.array(cols[4], dtype=float),
        oracle_segment_value=np.array(cols[5], dtype=float),
    )


def binned_coverage(keys, coverage, n_bins: int = 10):
    """Mean coverage and counts within equal-frequency bins of ``keys``."""
    keys = np.asarray(keys, dtype=float)
    coverage = np.asarray(coverage, dtype=float)
    qs = np.quantile(keys, np.linspace(0, 1, n_bins + 1)[1:-1])
    b = np.searchsorted(qs, keys, side="right")
    means, counts = [], []
    for k in range(n_bins):
        m = b == k
        if m.any():
            means.append(float(coverage[m].mean()))
            counts.append(int(m.sum()))
    return np.array(means), np.array(counts)


def _method_intervals(cal_f, cal_y, test_f, cfg: SccpConfig, mondrian_bins: int, threads):
    """Intervals and point predictions for each method on one split."""
    data = prepare_calibration(cal_f, cal_y, cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyIntervalWarning)
        b = band(data, cfg, threads=threads)
    idx = b.nearest_index(test_f)
    out = {
        "sccp": (b.column("lower")[idx], b.column("upper")[idx], b.column("point")[idx],
                 b.column("set_measure")[idx]),
    }
    resid = np.abs(cal_y - cal_f)
    split = fit_split_cp(resid, cfg.alpha)
    lo, hi = interval_at(split, test_f)
    out["split"] = (lo, hi, test_f, None)
    mond = fit_mondrian(np.column_stack([cal_f, resid]), mondrian_bins, cfg.alpha)
    lo, hi = interval_at(mond, test_f)
    out["mondrian"] = (lo, hi, test_f, None)
    n_seg = fit_isotonic(cal_f, data.outcomes, min_segment_mass=cfg.min_segment_mass).n_segments
    mond_star = fit_mondrian(np.column_stack([cal_f, resid]), n_seg, cfg.alpha)
    lo, hi = interval_at(mond_star, test_f)
    out["mondrian_star"] = (lo, hi, test_f, None)
    return out


def calibration_efficiency(
    distortions=(0.0, 0.2, 0.4),
    setup: SynthConfig | None = None,
    n_cal: int = 1000,
    n_test: int = 1000,
    cfg: SccpConfig = SccpConfig(),
    mondrian_bins: int = 20,
    seed: int = 0,
    threads: int | None = None,
) -> list[dict]:
    """Width and calibration error as the predictor is increasingly distorted.

    The same calibration and test draws are reused across distortion levels.
    """
    setup = setup or SynthConfig.preset("setup-a")
    cal = _split_data(setup, n_cal, "cal", seed)
    test = _split_data(setup, n_test, "test", seed)
    rows = []
    for c in distortions:
        f = make_predictor(setup, "distorted", c=c)
        cal_f, test_f = f(cal.features), f(test.features)
        methods = _method_intervals(cal_f, cal.outcomes, test_f, cfg, mondrian_bins, threads)
        mu = oracle_mu(test.features)
        sd = np.sqrt(oracle_sigma2(test.features, setup.a, setup.b))
        methods["oracle"] = (*gaussian_interval(mu, sd, cfg.alpha), mu, None)
        for name, (lo, hi, point, measure) in methods.items():
            rep = score(np.column_stack([lo, hi]), point, test.outcomes, set_measures=measure)
            rows.append(dict(
                method=name, distortion=float(c), coverage=rep.coverage,
                avg_width=rep.avg_width, cal_error=rep.cal_error, count=rep.count,
                n_infinite=rep.n_infinite, n_empty=rep.n_empty,
            ))
    return rows


def conditional_coverage(
    setup: SynthConfig | None = None,
    n_cal: int = 1000,
    n_test: int = 2500,
    cfg: SccpConfig = SccpConfig(),
    predictor: str = "oracle",
    mondrian_bins: int = 20,
    seed: int = 0,
    threads: int | None = None,
    **predictor_params,
) -> list[dict]:
    """Coverage and width within quintiles of the true conditional variance."""
    setup = setup or SynthConfig.preset("setup-a")
    cal = _split_data(setup, n_cal, "cal", seed)
    test = _split_data(setup, n_test, "test", seed)
    f = make_predictor(replace(setup, seed=seed), predictor, **predictor_params)
    cal_f, test_f = f(cal.features), f(test.features)
    methods = _method_intervals(cal_f, cal.outcomes, test_f, cfg, mondrian_bins, threads)
    mu = oracle_mu(test.features)
    var = oracle_sigma2(test.features, setup.a, setup.b)
    methods["oracle"] = (*gaussian_interval(mu, np.sqrt(var), cfg.alpha), mu, None)
    quint = bin_by_quintile(var)
    rows = []
    for name, (lo, hi, point, _) in methods.items():
        rep = score(np.column_stack([lo, hi]), point, test.outcomes, group=quint)
        rows.append(dict(method=name, quintile="all", coverage=rep.coverage,
                         avg_width=rep.avg_width, count=rep.count))
        for label, s in rep.by_group.items():
            rows.append(dict(method=name, quintile=label, coverage=s.coverage,
                             avg_width=s.avg_width, count=s.count))
    return rows
