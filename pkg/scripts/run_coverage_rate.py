"""Marginal and prediction-binned SC-CP coverage as the calibration set grows.

Deviation of binned coverage from the target shrinks with n_cal. Bins are
equal-frequency bins of the calibration-only isotonic fit at the test point.

Usage: python scripts/run_coverage_rate.py --sizes 500 2000 8000 --replicates 200
"""

import argparse

import numpy as np

from sccp.conformal import SccpConfig
from sccp.experiments import binned_coverage, coverage_run
from sccp.synth import SynthConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="setup-a")
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 2000, 8000])
    ap.add_argument("--replicates", type=int, default=200)
    ap.add_argument("--n-test", type=int, default=10)
    ap.add_argument("--bins", type=int, default=10)
    ap.add_argument("--alpha", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int)
    a = ap.parse_args()

    setup = SynthConfig.preset(a.preset)
    print(f"{'n_cal':>7}{'coverage':>10}{'mean width':>12}{'binned MAD':>12}")
    for n in a.sizes:
        run = coverage_run(setup, n, a.replicates, a.n_test, SccpConfig(alpha=a.alpha),
                           seed=a.seed, threads=a.threads)
        means, _ = binned_coverage(run.segment_value, run.expected_coverage, a.bins)
        mad = float(np.mean(np.abs(means - (1 - a.alpha))))
        print(f"{n:>7}{run.coverage:>10.4f}{run.width.mean():>12.4f}{mad:>12.4f}")


if __name__ == "__main__":
    main()
