"""Coverage and width within quintiles of the true noise variance.

Usage: python scripts/run_conditional_coverage.py --predictor knn --out results/
"""

import argparse
from pathlib import Path

from sccp.conformal import SccpConfig
from sccp.experiments import conditional_coverage
from sccp.io import write_table
from sccp.synth import SynthConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="setup-a")
    ap.add_argument("--predictor", choices=["oracle", "knn"], default="oracle")
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--n-cal", type=int, default=1000)
    ap.add_argument("--n-test", type=int, default=2500)
    ap.add_argument("--alpha", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--out", type=Path)
    a = ap.parse_args()

    extra = dict(k=a.k, n_train=a.n_cal) if a.predictor == "knn" else {}
    rows = conditional_coverage(SynthConfig.preset(a.preset), a.n_cal, a.n_test, SccpConfig(alpha=a.alpha),
                                a.predictor, seed=a.seed, threads=a.threads, **extra)
    print(f"{'method':<14}{'quintile':>9}{'coverage':>10}{'width':>10}{'n':>7}")
    for r in rows:
        print(f"{r['method']:<14}{r['quintile']:>9}{r['coverage']:>10.4f}{r['avg_width']:>10.4f}{r['count']:>7}")
    if a.out:
        a.out.mkdir(parents=True, exist_ok=True)
        header = list(rows[0])
        write_table(a.out / "conditional_coverage.csv", header, [[r[h] for h in header] for r in rows])


if __name__ == "__main__":
    main()
