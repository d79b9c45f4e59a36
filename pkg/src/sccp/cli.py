"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 invalid input or arguments.
Errors go to stderr as a single ``error: <message>`` line.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import experiments
from ._parallel import resolve_threads
from .conformal import SccpConfig, band, prepare_calibration
from .io import (
    PREDICTION_COLUMNS,
    BandTable,
    InputError,
    band_to_dict,
    numeric_column,
    read_table,
    write_json,
    write_table,
)
from .metrics import bin_by_quintile, score
from .synth import SynthConfig, generate, make_predictor, oracle_sigma2, write_dataset

# command -> option defaults; a --config file may set any of these keys
DEFAULTS = {
    "simulate": dict(preset="setup-a", n_train=1000, n_cal=1000, n_test=1000, kappa=1.0,
                     predictor="oracle", c=0.0, k=10, kappa_train=1.0, seed=0),
    "band": dict(alpha=0.1, y_grid_bins=200, pred_grid_bins=200, min_segment=20.0,
                 jitter=0.0, seed=0, threads=None),
    "predict": dict(),
    "evaluate": dict(),
    "experiment": dict(preset="setup-a", n_cal=1000, n_test=1000, distortions=[0.0, 0.2, 0.4],
                       predictor="oracle", k=10, kappa_train=1.0, mondrian_bins=20,
                       alpha=0.1, y_grid_bins=200, pred_grid_bins=200, min_segment=20.0,
                       seed=0, threads=None),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(2)


def _add_sccp_options(p):
    p.add_argument("--alpha", type=float)
    p.add_argument("--y-grid-bins", type=int)
    p.add_argument("--pred-grid-bins", type=int)
    p.add_argument("--min-segment", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sccp", description="Self-calibrating conformal prediction toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write synthetic train/cal/test CSVs")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--preset", choices=["setup-a", "setup-b", "setup-c"])
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-cal", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--predictor", choices=["oracle", "distorted", "knn"])
    p.add_argument("--c", type=float, help="distortion strength")
    p.add_argument("--k", type=int, help="k-NN neighbours")
    p.add_argument("--kappa-train", type=float)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("band", help="fit a prediction band from a calibration CSV")
    p.add_argument("cal_csv")
    p.add_argument("--out", required=True)
    _add_sccp_options(p)
    p.add_argument("--jitter", type=float)

    p = sub.add_parser("predict", help="look up band rows for a test CSV")
    p.add_argument("band_json")
    p.add_argument("test_csv")
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="coverage / width / calibration error of predictions")
    p.add_argument("pred_csv")
    p.add_argument("--out", required=True, help="output JSON path; a CSV is written beside it")

    p = sub.add_parser("experiment", help="run a packaged simulation study")
    p.add_argument("name", choices=["calibration-efficiency", "conditional-coverage"])
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--preset", choices=["setup-a", "setup-b", "setup-c"])
    p.add_argument("--n-cal", type=int)
    p.add_argument("--n-test", type=int)
    p.add_argument("--distortions", type=float, nargs="+")
    p.add_argument("--predictor", choices=["oracle", "knn"])
    p.add_argument("--k", type=int)
    p.add_argument("--kappa-train", type=float)
    p.add_argument("--mondrian-bins", type=int)
    _add_sccp_options(p)

    for p in sub.choices.values():
        p.add_argument("--config", help="JSON file of option values; flags override it")
    return parser


def resolve_options(args) -> dict:
    """Defaults, then the config file, then explicit flags."""
    opts = dict(DEFAULTS[args.command])
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config must be a JSON object")
        unknown = sorted(set(loaded) - set(opts))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        opts.update(loaded)
    for key in opts:
        v = getattr(args, key, None)
        if v is not None:
            opts[key] = v
    return opts


def _sccp_config(o) -> SccpConfig:
    try:
        return SccpConfig(alpha=o["alpha"], y_grid_bins=o["y_grid_bins"],
                          pred_grid_bins=o["pred_grid_bins"], min_segment_mass=o["min_segment"],
                          jitter=o.get("jitter", 0.0), seed=o["seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _threads(o):
    try:
        return resolve_threads(o.get("threads"))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_simulate(args, o):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        base = SynthConfig.preset(o["preset"], kappa=o["kappa"], seed=o["seed"])
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    params = {"distorted": dict(c=o["c"]),
              "knn": dict(k=o["k"], kappa_train=o["kappa_train"], n_train=o["n_train"])}
    f = make_predictor(base, o["predictor"], **params.get(o["predictor"], {}))
    for split in ("train", "cal", "test"):
        cfg = replace(base, n=o[f"n_{split}"])
        ds = generate(cfg, split)
        ds.predictions = np.atleast_1d(f(ds.features))
        var = oracle_sigma2(ds.features, cfg.a, cfg.b)
        ds.group = bin_by_quintile(np.atleast_1d(var)) if len(ds) >= 5 else None
        write_dataset(ds, out / f"{split}.csv", cfg)
    write_json(out / "simulate.json", o)


def cmd_band(args, o):
    cfg = _sccp_config(o)
    threads = _threads(o)
    header, rows = read_table(args.cal_csv)
    f = numeric_column(header, rows, "f_pred", args.cal_csv)
    y = numeric_column(header, rows, "y", args.cal_csv)
    if f.size < 2:
        raise UsageError("band needs at least 2 calibration rows")
    b = band(prepare_calibration(f, y, cfg), cfg, threads=threads)
    write_json(args.out, band_to_dict(b))


def cmd_predict(args, o):
    table = BandTable.load(args.band_json)
    header, rows = read_table(args.test_csv)
    f = numeric_column(header, rows, "f_pred", args.test_csv)
    idx = table.rows_for(f)
    extra = [c for c in ("y", "group") if c in header]
    out_rows = []
    for i, r in enumerate(rows):
        j = idx[i]
        rid = r["id"] if "id" in header else str(i)
        out_rows.append([rid, f[i], table.point[j], table.lower[j], table.upper[j],
                         table.range_low[j], table.range_high[j]] + [r[c] for c in extra])
    write_table(args.out, PREDICTION_COLUMNS + extra, out_rows)


def cmd_evaluate(args, o):
    header, rows = read_table(args.pred_csv)
    cols = {c: numeric_column(header, rows, c, args.pred_csv) for c in ("lower", "upper", "point", "y")}
    group = [r["group"] for r in rows] if "group" in header else None
    if not rows:
        raise UsageError(f"{args.pred_csv}: no rows")
    rep = score(np.column_stack([cols["lower"], cols["upper"]]), cols["point"], cols["y"], group=group)
    Path(args.out).write_text(rep.to_json(), encoding="utf-8")
    Path(args.out).with_suffix(".csv").write_text(rep.to_csv(), encoding="utf-8")


def cmd_experiment(args, o):
    cfg = _sccp_config(o)
    threads = _threads(o)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        setup = SynthConfig.preset(o["preset"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.name == "calibration-efficiency":
        rows = experiments.calibration_efficiency(
            o["distortions"], setup, o["n_cal"], o["n_test"], cfg,
            mondrian_bins=o["mondrian_bins"], seed=o["seed"], threads=threads)
        stem = "calibration_efficiency"
    else:
        extra = {}
        if o["predictor"] == "knn":
            extra = dict(k=o["k"], kappa_train=o["kappa_train"], n_train=o["n_cal"])
        rows = experiments.conditional_coverage(
            setup, o["n_cal"], o["n_test"], cfg, o["predictor"],
            mondrian_bins=o["mondrian_bins"], seed=o["seed"], threads=threads, **extra)
        stem = "conditional_coverage"
    header = list(rows[0])
    write_table(out / f"{stem}.csv", header, [[r[h] for h in header] for r in rows])
    write_json(out / f"{stem}.json", dict(experiment=args.name, options=_public(o), rows=rows))


def _public(o):
    # worker count never affects results, so it is not recorded
    return {k: v for k, v in o.items() if k != "threads"}


COMMANDS = {
    "simulate": cmd_simulate,
    "band": cmd_band,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        opts = resolve_options(args)
        COMMANDS[args.command](args, opts)
    except (UsageError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
