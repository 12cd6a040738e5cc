import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from orthogp.cli import main
from orthogp.experiments import SCHEME_2

OGP_SE = {"domain": {"lower": [0], "upper": [1]},
          "kernel": {"family": "squared_exponential", "lengthscales": [1.0]},
          "method": "OGP"}


@pytest.fixture
def scheme2_csv(tmp_path):
    path = tmp_path / "scheme2.csv"
    with open(path, "w") as fh:
        fh.write("x1,y\n")
        for x in SCHEME_2:
            fh.write(f"{x!r},{float(np.sin(2 * x))!r}\n")
    return path


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return path


def read_table(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def test_fit_scheme2(tmp_path, scheme2_csv):
    cfg = write_json(tmp_path / "c.json", OGP_SE)
    out = tmp_path / "fit.json"
    assert main(["fit", str(scheme2_csv), str(cfg), "-o", str(out)]) == 0
    fit = json.loads(out.read_text())
    np.testing.assert_allclose(fit["beta_hat_original"], [0.22, 0.98], atol=0.01)
    assert fit["config"]["mle"]["enabled"] is False
    assert len(fit["config_fingerprint"]) == 16


def test_fit_matern_quadrature(tmp_path, scheme2_csv):
    cfg = dict(OGP_SE, kernel={"family": "matern32", "lengthscales": [1.0]},
               orthogonalization={"mode": "quadrature"})
    out = tmp_path / "fit.json"
    assert main(["fit", str(scheme2_csv), str(write_json(tmp_path / "c.json", cfg)), "-o", str(out)]) == 0
    assert json.loads(out.read_text())["orthogonalization"]["mode"] == "quadrature"


def test_fit_with_mle(tmp_path, scheme2_csv):
    cfg = dict(OGP_SE, mle={"enabled": True, "starts": 2})
    out = tmp_path / "fit.json"
    assert main(["fit", str(scheme2_csv), str(write_json(tmp_path / "c.json", cfg)), "-o", str(out)]) == 0
    fit = json.loads(out.read_text())
    assert 0.1 <= fit["psi_hat"][0] <= 5.0
    assert len(fit["diagnostics"]["starts"]) == 2


def test_empty_csv(tmp_path, capsys):
    data = tmp_path / "e.csv"
    data.write_text("x1,y\n")
    assert main(["fit", str(data), str(write_json(tmp_path / "c.json", OGP_SE))]) == 2
    assert "no data rows" in capsys.readouterr().err


def test_malformed_row(tmp_path, capsys):
    data = tmp_path / "m.csv"
    data.write_text("x1,y\n0.1,0.2\n0.3,abc\n")
    assert main(["fit", str(data), str(write_json(tmp_path / "c.json", OGP_SE))]) == 2
    assert "line 3" in capsys.readouterr().err


def test_decimal_comma_rejected(tmp_path):
    data = tmp_path / "m.csv"
    data.write_text('x1,y\n"0,1",0.2\n')
    assert main(["fit", str(data), str(write_json(tmp_path / "c.json", OGP_SE))]) == 2


def test_unknown_config_key(tmp_path, scheme2_csv):
    cfg = write_json(tmp_path / "c.json", dict(OGP_SE, nugget=1e-8))
    assert main(["fit", str(scheme2_csv), str(cfg)]) == 2


def test_optimizer_failure_exit_3(tmp_path, scheme2_csv, monkeypatch, capsys):
    import orthogp.cli as cli
    from orthogp.exceptions import OptimizationError

    def failing(*args, **kwargs):
        raise OptimizationError("all likelihood starts failed")

    monkeypatch.setattr(cli, "fit_mle", failing)
    cfg = dict(OGP_SE, mle={"enabled": True})
    assert main(["fit", str(scheme2_csv), str(write_json(tmp_path / "c.json", cfg))]) == 3
    assert "numerical failure" in capsys.readouterr().err


@pytest.fixture
def fitted(tmp_path, scheme2_csv):
    out = tmp_path / "fit.json"
    main(["fit", str(scheme2_csv), str(write_json(tmp_path / "c.json", OGP_SE)), "-o", str(out)])
    return out


def test_predict_at_training_points(tmp_path, fitted, scheme2_csv):
    pts = tmp_path / "p.csv"
    pts.write_text("x1\n" + "".join(f"{x!r}\n" for x in SCHEME_2))
    out = tmp_path / "pred.csv"
    assert main(["predict", str(fitted), str(pts), "-o", str(out)]) == 0
    tab = read_table(out)
    assert list(tab) == ["x1", "mean", "variance", "trend", "stochastic"]
    np.testing.assert_allclose(tab["mean"], np.sin(2 * np.array(SCHEME_2)), atol=1e-8)
    assert np.all(tab["variance"] >= 0)
    beta = json.loads(fitted.read_text())["beta_hat_original"]
    np.testing.assert_allclose(tab["trend"], beta[0] + beta[1] * tab["x1"], atol=1e-12)
    np.testing.assert_allclose(tab["trend"] + tab["stochastic"], tab["mean"], atol=1e-12)


def test_predict_full_precision_round_trip(tmp_path, fitted):
    pts = tmp_path / "p.csv"
    x = 0.1234567890123456789
    pts.write_text(f"x1\n{x!r}\n")
    out = tmp_path / "pred.csv"
    main(["predict", str(fitted), str(pts), "-o", str(out)])
    assert read_table(out)["x1"][0] == x


def test_predict_dimension_mismatch(tmp_path, fitted, capsys):
    pts = tmp_path / "p.csv"
    pts.write_text("x1,x2\n0.1,0.2\n")
    assert main(["predict", str(fitted), str(pts)]) == 2
    assert "d=2" in capsys.readouterr().err


def test_eigen(tmp_path):
    out = tmp_path / "eig"
    assert main(["eigen", "--basis", "linear", "--k", "3", "--out-dir", str(out)]) == 0
    tab = read_table(out / "eigenfunctions.csv")
    assert list(tab) == ["u", "f1", "f2", "f3"]
    meta = json.loads((out / "eigenvalues.json").read_text())
    assert len(meta["eigenvalues"]) == 3 and "config_fingerprint" in meta


def test_bench_unknown(capsys):
    assert main(["bench", "table2"]) == 2
    assert "table1" in capsys.readouterr().err


def test_bench_effects_check(tmp_path, capsys):
    assert main(["bench", "effects-check", "--out-dir", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()[:3]
    assert (tmp_path / "effects-check.json").exists()
    assert all(float(line.split()[-1]) <= 1e-8 for line in lines)


def test_bench_table1(tmp_path):
    assert main(["bench", "table1", "--out-dir", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "table1.json").read_text())
    assert len(report["rows"]) == 14


def test_bench_borehole_deterministic(tmp_path):
    args = ["bench", "borehole", "--n", "20", "--reps", "2", "--seed", "7"]
    assert main(args + ["--out-dir", str(tmp_path / "a")]) == 0
    assert main(args + ["--out-dir", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "borehole.json").read_bytes() == (tmp_path / "b" / "borehole.json").read_bytes()
    assert (tmp_path / "a" / "borehole.csv").read_bytes() == (tmp_path / "b" / "borehole.csv").read_bytes()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "orthogp", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
