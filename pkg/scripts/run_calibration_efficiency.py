"""Width and coverage of SC-CP against split and Mondrian CP as the predictor is distorted.

Usage: python scripts/run_calibration_efficiency.py --n-cal 2000 --out results/
"""

import argparse
from pathlib import Path

from sccp.conformal import SccpConfig
from sccp.experiments import calibration_efficiency
from sccp.io import write_json, write_table
from sccp.synth import SynthConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="setup-a")
    ap.add_argument("--distortions", type=float, nargs="+", default=[0.0, 0.2, 0.4])
    ap.add_argument("--n-cal", type=int, default=1000)
    ap.add_argument("--n-test", type=int, default=1000)
    ap.add_argument("--alpha", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--out", type=Path)
    a = ap.parse_args()

    rows = calibration_efficiency(a.distortions, SynthConfig.preset(a.preset), a.n_cal, a.n_test,
                                  SccpConfig(alpha=a.alpha, seed=a.seed), seed=a.seed, threads=a.threads)
    print(f"{'method':<14}{'c':>6}{'coverage':>10}{'width':>10}{'cal err':>10}")
    for r in rows:
        print(f"{r['method']:<14}{r['distortion']:>6.2f}{r['coverage']:>10.4f}"
              f"{r['avg_width']:>10.4f}{r['cal_error']:>10.4f}")
    if a.out:
        a.out.mkdir(parents=True, exist_ok=True)
        header = list(rows[0])
        write_table(a.out / "calibration_efficiency.csv", header, [[r[h] for h in header] for r in rows])
        write_json(a.out / "calibration_efficiency.json", dict(options=vars(a) | {"out": str(a.out)}, rows=rows))


if __name__ == "__main__":
    main()
