import csv
import json

import numpy as np
import pytest

from sccp.cli import main
from sccp.io import BandTable


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return str(path)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def cal_csv(tmp_path):
    rng = np.random.default_rng(0)
    f = rng.uniform(size=120)
    y = f + rng.normal(scale=0.2, size=120)
    return _write_csv(tmp_path / "cal.csv", ["f_pred", "y"], zip(f.tolist(), y.tolist()))


class TestSimulate:
    def test_writes_splits_with_sidecars(self, tmp_path):
        assert main(["simulate", "--out", str(tmp_path), "--n-train", "10",
                     "--n-cal", "20", "--n-test", "30"]) == 0
        for split, n in (("train", 10), ("cal", 20), ("test", 30)):
            rows = _read_csv(tmp_path / f"{split}.csv")
            assert len(rows) == n
            assert list(rows[0]) == ["x1", "x2", "x3", "x4", "x5", "y", "f_pred", "group"]
            assert (tmp_path / f"{split}.json").exists()
        groups = {r["group"] for r in _read_csv(tmp_path / "test.csv")}
        assert groups == {"1", "2", "3", "4", "5"}

    def test_byte_identical_reruns(self, tmp_path):
        args = ["--n-train", "5", "--n-cal", "8", "--n-test", "8", "--seed", "4", "--preset", "setup-c"]
        main(["simulate", "--out", str(tmp_path / "a")] + args)
        main(["simulate", "--out", str(tmp_path / "b")] + args)
        for name in ("train.csv", "cal.csv", "test.csv", "cal.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_distorted_predictor(self, tmp_path):
        main(["simulate", "--out", str(tmp_path), "--n-cal", "6", "--n-test", "6", "--n-train", "6",
              "--predictor", "distorted", "--c", "0.5"])
        from sccp.synth import oracle_mu
        rows = _read_csv(tmp_path / "cal.csv")
        x = np.array([[float(r[f"x{j}"]) for j in range(1, 6)] for r in rows])
        mu = oracle_mu(x)
        np.testing.assert_allclose([float(r["f_pred"]) for r in rows], mu + 0.5 * mu**2)


class TestBandAndPredict:
    def test_band_round_trip(self, tmp_path, cal_csv):
        out = tmp_path / "band.json"
        assert main(["band", cal_csv, "--out", str(out), "--pred-grid-bins", "3",
                     "--y-grid-bins", "30"]) == 0
        d = json.loads(out.read_text())
        assert len(d["rows"]) == 3 and len(d["grid_fx"]) == 3
        assert d["config"]["pred_grid_bins"] == 3
        t = BandTable.load(out)
        assert np.all(t.lower <= t.point) and np.all(t.point <= t.upper)
        assert np.all(np.diff(t.grid_fx) > 0)

    def test_single_grid_point(self, tmp_path, cal_csv):
        out = tmp_path / "band.json"
        assert main(["band", cal_csv, "--out", str(out), "--pred-grid-bins", "1",
                     "--y-grid-bins", "20"]) == 0
        assert len(json.loads(out.read_text())["rows"]) == 1

    def test_bad_alpha_exits_2(self, tmp_path, cal_csv, capsys):
        assert main(["band", cal_csv, "--out", str(tmp_path / "b.json"), "--alpha", "2"]) == 2
        assert "alpha must be in (0,1)" in capsys.readouterr().err

    def test_predict_uses_nearest_row(self, tmp_path, cal_csv):
        band_path = tmp_path / "band.json"
        main(["band", cal_csv, "--out", str(band_path), "--pred-grid-bins", "4", "--y-grid-bins", "20"])
        t = BandTable.load(band_path)
        g = t.grid_fx
        mid = (g[0] + g[1]) / 2
        test = _write_csv(tmp_path / "test.csv", ["f_pred", "y"],
                          [[g[2], 0.1], [mid, 0.2], [-50.0, 0.3]])
        out = tmp_path / "pred.csv"
        assert main(["predict", str(band_path), test, "--out", str(out)]) == 0
        rows = _read_csv(out)
        assert list(rows[0]) == ["id", "f_pred", "point", "lower", "upper", "range_low", "range_high", "y"]
        assert float(rows[0]["lower"]) == t.lower[2]
        # midpoint tie resolves to the lower grid point
        assert float(rows[1]["upper"]) == t.upper[0]
        assert float(rows[2]["point"]) == t.point[0]
        assert [r["id"] for r in rows] == ["0", "1", "2"]

    def test_predict_empty_test_file(self, tmp_path, cal_csv):
        band_path = tmp_path / "band.json"
        main(["band", cal_csv, "--out", str(band_path), "--pred-grid-bins", "2", "--y-grid-bins", "10"])
        test = _write_csv(tmp_path / "test.csv", ["f_pred"], [])
        out = tmp_path / "pred.csv"
        assert main(["predict", str(band_path), test, "--out", str(out)]) == 0
        assert out.read_text().strip() == ",".join(["id", "f_pred", "point", "lower", "upper",
                                                    "range_low", "range_high"])

    def test_not_a_band_file(self, tmp_path, cal_csv, capsys):
        bogus = tmp_path / "x.json"
        bogus.write_text("{}")
        assert main(["predict", str(bogus), cal_csv, "--out", str(tmp_path / "p.csv")]) == 2
        assert capsys.readouterr().err.startswith("error:")


class TestEvaluate:
    def test_three_of_four(self, tmp_path):
        pred = _write_csv(tmp_path / "p.csv", ["lower", "upper", "point", "y"],
                          [[0, 1, 0.5, 0.0], [0, 1, 0.5, 1.0], [0, 1, 0.5, 0.5], [0, 1, 0.5, 1.5]])
        out = tmp_path / "m.json"
        assert main(["evaluate", pred, "--out", str(out)]) == 0
        rep = json.loads(out.read_text())
        assert rep["coverage"] == 0.75 and rep["avg_width"] == 1.0
        assert (tmp_path / "m.csv").read_text().startswith("scope,label")

    def test_groups(self, tmp_path):
        pred = _write_csv(tmp_path / "p.csv", ["lower", "upper", "point", "y", "group"],
                          [[0, 1, 0.5, 0.5, "a"], [0, 1, 0.5, 2.0, "b"]])
        out = tmp_path / "m.json"
        main(["evaluate", pred, "--out", str(out)])
        by = json.loads(out.read_text())["by_group"]
        assert by["a"]["coverage"] == 1.0 and by["b"]["coverage"] == 0.0

    def test_full_pipeline(self, tmp_path):
        main(["simulate", "--out", str(tmp_path), "--n-cal", "300", "--n-test", "200", "--n-train", "5"])
        main(["band", str(tmp_path / "cal.csv"), "--out", str(tmp_path / "band.json"),
              "--pred-grid-bins", "30", "--y-grid-bins", "60"])
        main(["predict", str(tmp_path / "band.json"), str(tmp_path / "test.csv"),
              "--out", str(tmp_path / "pred.csv")])
        assert main(["evaluate", str(tmp_path / "pred.csv"), "--out", str(tmp_path / "m.json")]) == 0
        rep = json.loads((tmp_path / "m.json").read_text())
        assert rep["count"] == 200
        assert 0.75 <= rep["coverage"] <= 1.0
        assert set(rep["by_group"]) == {"1", "2", "3", "4", "5"}


class TestInputErrors:
    def test_missing_column(self, tmp_path, capsys):
        p = _write_csv(tmp_path / "c.csv", ["f_pred"], [[1.0], [2.0]])
        assert main(["band", p, "--out", str(tmp_path / "b.json")]) == 2
        assert "missing column 'y'" in capsys.readouterr().err

    def test_non_numeric_cell(self, tmp_path, capsys):
        p = _write_csv(tmp_path / "c.csv", ["f_pred", "y"], [[1.0, 2.0], ["abc", 1.0]])
        assert main(["band", p, "--out", str(tmp_path / "b.json")]) == 2
        assert "non-numeric cell" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path, cal_csv, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"alpha": 0.2, "bogus": 1}))
        assert main(["band", cal_csv, "--out", str(tmp_path / "b.json"), "--config", str(cfg)]) == 2
        assert "unknown config keys: bogus" in capsys.readouterr().err

    def test_flags_override_config(self, tmp_path, cal_csv):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"alpha": 0.3, "pred_grid_bins": 2, "y_grid_bins": 10}))
        out = tmp_path / "b.json"
        assert main(["band", cal_csv, "--out", str(out), "--config", str(cfg), "--alpha", "0.2"]) == 0
        c = json.loads(out.read_text())["config"]
        assert c["alpha"] == 0.2 and c["pred_grid_bins"] == 2

    def test_bad_preset_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--out", str(tmp_path), "--preset", "setup-z"])
        assert exc.value.code == 2


def test_experiment_schema(tmp_path):
    out = tmp_path / "exp"
    assert main(["experiment", "calibration-efficiency", "--out", str(out), "--n-cal", "200",
                 "--n-test", "100", "--distortions", "0", "0.4", "--y-grid-bins", "40",
                 "--pred-grid-bins", "40"]) == 0
    rows = _read_csv(out / "calibration_efficiency.csv")
    assert list(rows[0]) == ["method", "distortion", "coverage", "avg_width", "cal_error",
                             "count", "n_infinite", "n_empty"]
    methods = {r["method"] for r in rows}
    assert {"sccp", "split", "mondrian", "mondrian_star"} <= methods
    meta = json.loads((out / "calibration_efficiency.json").read_text())
    assert "threads" not in meta["options"]
