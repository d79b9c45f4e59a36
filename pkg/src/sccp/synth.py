"""Synthetic heteroscedastic regression data with known conditional law.

Covariates are i.i.d. Beta(1, kappa) per coordinate; the outcome is Gaussian
with mean ``mu(x) = d**-0.5 * sum_j (x_j + sin(4 x_j))`` and standard
deviation ``|0.035 - a*log(0.5 + 0.5*x_1)/8 + b*(|mu(x)|**6/20 - 0.02)/2|``.

Random streams: every draw comes from a Philox generator keyed on
``(seed, split, stream)``. Streams ``0..d-1`` are the covariate columns and
stream ``d`` is the outcome noise, so each column is reproducible on its own.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.stats import norm
from sklearn.neighbors import KNeighborsRegressor

SPLITS = {"train": 0, "cal": 1, "test": 2}

PRESETS = {
    "setup-a": dict(d=5, a=0.0, b=0.6),
    "setup-b": dict(d=5, a=0.0, b=0.6),
    "setup-c": dict(d=5, a=0.6, b=0.0),
}


@dataclass(frozen=True)
class SynthConfig:
    d: int = 5
    kappa: float = 1.0
    a: float = 0.0
    b: float = 0.6
    n: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.a < 0 or self.b < 0:
            raise ValueError("a and b must be nonnegative")

    @classmethod
    def preset(cls, name: str, **overrides) -> "SynthConfig":
        try:
            params = dict(PRESETS[name])
        except KeyError:
            raise ValueError(f"unknown preset {name!r}") from None
        params.update(overrides)
        return cls(**params)


@dataclass
class Dataset:
    features: np.ndarray
    outcomes: np.ndarray
    predictions: np.ndarray | None = None
    group: np.ndarray | None = None

    def __post_init__(self):
        n = self.features.shape[0]
        for name in ("outcomes", "predictions", "group"):
            col = getattr(self, name)
            if col is not None and len(col) != n:
                raise ValueError(f"{name} has {len(col)} rows, expected {n}")

    def __len__(self) -> int:
        return self.features.shape[0]


def _stream(seed: int, split: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, split, stream])))


def _check_unit_cube(x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if np.any(~np.isfinite(x)) or np.any(x < 0) or np.any(x > 1):
        raise ValueError("x must lie in [0,1]^d")
    return x


def _squeeze(v, x_in):
    return float(v[0]) if np.ndim(x_in) <= 1 else v


def oracle_mu(x):
    x_in = x
    x = _check_unit_cube(x)
    mu = (x + np.sin(4.0 * x)).sum(axis=1) / np.sqrt(x.shape[1])
    return _squeeze(mu, x_in)


def oracle_sigma2(x, a: float, b: float):
    x_in = x
    x = _check_unit_cube(x)
    mu = np.atleast_1d(oracle_mu(x))
    sd = 0.035 - a * np.log(0.5 + 0.5 * x[:, 0]) / 8.0 + b * (np.abs(mu) ** 6 / 20.0 - 0.02) / 2.0
    return _squeeze(sd * sd, x_in)


def oracle_interval(x, alpha: float, a: float, b: float):
    """Conditional ``1 - alpha`` interval under the true Gaussian law."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0,1)")
    z = norm.ppf(1.0 - alpha / 2.0)
    mu = oracle_mu(x)
    sd = np.sqrt(oracle_sigma2(x, a, b))
    return mu - z * sd, mu + z * sd


def gaussian_interval(mu, sd, alpha: float):
    z = norm.ppf(1.0 - alpha / 2.0)
    return mu - z * sd, mu + z * sd


def generate(cfg: SynthConfig, split: str = "cal") -> Dataset:
    """Draw ``cfg.n`` rows; deterministic in ``(cfg, split)``."""
    s = SPLITS[split]
    cols = []
    for j in range(cfg.d):
        u = _stream(cfg.seed, s, j).random(cfg.n)
        # inverse CDF of Beta(1, kappa)
        cols.append(1.0 - u ** (1.0 / cfg.kappa))
    x = np.column_stack(cols)
    mu = oracle_mu(x)
    sd = np.sqrt(oracle_sigma2(x, cfg.a, cfg.b))
    y = mu + sd * _stream(cfg.seed, s, cfg.d).standard_normal(cfg.n)
    return Dataset(features=x, outcomes=y)


def make_predictor(cfg: SynthConfig, kind: str = "oracle", **params) -> Callable:
    """Black-box predictor for the synthetic law.

    ``kind`` is one of:
      * ``"oracle"``: the true conditional mean.
      * ``"distorted"`` with ``c``: ``mu + c * mu**2``, a monotone miscalibration.
      * ``"knn"`` with ``k``, ``kappa_train`` and optional ``n_train``: k-NN
        regression fit on a fresh training split drawn with ``kappa_train``.
    """
    if kind == "oracle":
        return oracle_mu
    if kind == "distorted":
        c = float(params.get("c", 0.0))

        def distorted(x):
            mu = oracle_mu(x)
            return mu + c * mu * mu
        return distorted
    if kind == "knn":
        k = int(params["k"])
        train_cfg = replace(cfg, kappa=float(params.get("kappa_train", cfg.kappa)),
                            n=int(params.get("n_train", cfg.n)))
        if k > train_cfg.n:
            raise ValueError("k larger than training n")
        train = generate(train_cfg, "train")
        model = KNeighborsRegressor(n_neighbors=k).fit(train.features, train.outcomes)

        def knn(x):
            x2 = _check_unit_cube(x)
            out = model.predict(x2)
            return _squeeze(out, x)
        return knn
    raise ValueError(f"unknown predictor kind {kind!r}")


def write_dataset(ds: Dataset, path: str | Path, cfg: SynthConfig | None = None) -> None:
    """CSV with columns x1..xd, y, f_pred, group plus a JSON config sidecar."""
    path = Path(path)
    d = ds.features.shape[1]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(d)] + ["y", "f_pred", "group"])
        for i in range(len(ds)):
            row = [repr(float(v)) for v in ds.features[i]]
            row.append(repr(float(ds.outcomes[i])))
            row.append("" if ds.predictions is None else repr(float(ds.predictions[i])))
            row.append("" if ds.group is None else str(ds.group[i]))
            w.writerow(row)
    if cfg is not None:
        sidecar = path.with_suffix(".json")
        sidecar.write_text(json.dumps(asdict(cfg), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_dataset(path: str | Path) -> Dataset:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return Dataset(np.empty((0, 0)), np.empty(0))
    xcols = sorted((c for c in rows[0] if c.startswith("x")), key=lambda c: int(c[1:]))
    x = np.array([[float(r[c]) for c in xcols] for r in rows])
    y = np.array([float(r["y"]) for r in rows])
    pred = None
    if rows[0].get("f_pred", ""):
        pred = np.array([float(r["f_pred"]) for r in rows])
    group = None
    if rows[0].get("group", ""):
        group = np.array([r["group"] for r in rows])
    return Dataset(x, y, pred, group)
