import json
import subprocess
import sys

import numpy as np
import pytest

from csrisk.cli import main
from csrisk.dataset import Dataset, read_dataset, write_dataset
from csrisk.estimators import read_estimate, write_estimate


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def data_csv(tmp_path):
    path = tmp_path / "data.csv"
    assert run("gen-data", "--n", 300, "--seed", 4, "--out", path) == 0
    return path


def test_entry_point_runs():
    out = subprocess.run([sys.executable, "-m", "csrisk.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "simulate-limit" in out.stdout


def test_gen_data_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("gen-data", "--n", 50, "--seed", 1, "--out", a) == 0
    assert run("gen-data", "--n", 50, "--seed", 1, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 51


def test_estimate_and_check_round_trip(tmp_path, data_csv, capsys):
    est, cert = tmp_path / "est.csv", tmp_path / "cert.json"
    assert run("estimate", "--data", data_csv, "--out", est, "--cert", cert) == 0
    c = json.loads(cert.read_text())
    assert c["converged"] and c["kkt_residual"] <= 1e-10 and c["n"] == 300 and c["K"] == 2
    assert run("check", "--data", data_csv, "--estimate", est) == 0
    assert capsys.readouterr().out.startswith("kkt_residual ")


def test_check_rejects_perturbed_estimate(tmp_path, data_csv):
    est = tmp_path / "est.csv"
    run("estimate", "--data", data_csv, "--out", est)
    fit = read_estimate(est, 2)
    comps = list(fit.components)
    F = comps[0]
    comps[0] = type(F)(F.knots, F.levels * 0.9)
    bad = tmp_path / "bad.csv"
    write_estimate(type(fit)(comps), bad)
    assert run("check", "--data", data_csv, "--estimate", bad) == 3


def test_two_observation_example(tmp_path):
    data = tmp_path / "d.csv"
    write_dataset(Dataset(2, [1.0, 2.0], [1, 3]), data)
    est = tmp_path / "e.csv"
    assert run("estimate", "--data", data, "--out", est, "--K", 2) == 0
    fit = read_estimate(est, 2)
    assert fit.components[0](1.0) == pytest.approx(0.5, abs=1e-9)
    assert fit.components[0](0.99) == 0.0


def test_one_cause_mle_equals_naive(tmp_path):
    data = tmp_path / "d.csv"
    run("gen-data", "--n", 120, "--seed", 3, "--out", data, "--cause-probs", "1", "--cond-rates", "1")
    assert read_dataset(data).K == 1
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("estimate", "--data", data, "--out", a) == 0
    assert run("estimate", "--data", data, "--out", b, "--estimator", "naive") == 0
    x = np.linspace(0, 5, 201)
    np.testing.assert_allclose(read_estimate(a, 1)(x), read_estimate(b, 1)(x), atol=1e-8)
    assert run("check", "--data", data, "--estimate", b) == 0


def test_infeasible_estimate_is_a_data_error(tmp_path, data_csv):
    est = tmp_path / "e.csv"
    est.write_text("k,t,value\n1,0.1,0.8\n2,0.1,0.8\n")
    assert run("check", "--data", data_csv, "--estimate", est) == 2


def test_missing_input_and_usage_errors(tmp_path, capsys):
    assert run("estimate", "--data", tmp_path / "none.csv", "--out", tmp_path / "e.csv") == 2
    assert "none.csv" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        run("estimate", "--data", "x", "--out", "y", "--estimator", "bogus")
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        run()
    assert info.value.code == 1


def test_force_is_required_to_overwrite(tmp_path, data_csv):
    est = tmp_path / "e.csv"
    est.write_text("keep")
    assert run("estimate", "--data", data_csv, "--out", est) == 1
    assert est.read_text() == "keep"
    assert run("estimate", "--data", data_csv, "--out", est, "--force") == 0


def test_nonconvergence_exit_code(tmp_path, data_csv):
    assert run("estimate", "--data", data_csv, "--out", tmp_path / "e.csv", "--max-iter", 1) == 3


def test_simulate_mse(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"sizes": [30], "reps": 2, "seed": 5, "estimators": ["mle", "naive"],
                               "grid": {"step": 0.5, "max": 3.0}}))
    a, b, meta = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "m.json"
    assert run("simulate-mse", "--config", cfg, "--out", a, "--meta", meta) == 0
    assert run("simulate-mse", "--config", cfg, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 1 + 2 * 2 * 7
    assert json.loads(meta.read_text())["seed"] == 5
    # flags override the config
    assert run("simulate-mse", "--config", cfg, "--out", b, "--force", "--seed", 6) == 0
    assert a.read_bytes() != b.read_bytes()


@pytest.mark.parametrize("extra", [("--reps", 0), ("--reps", 1), ("--estimators", ",")])
def test_simulate_mse_usage_errors(tmp_path, extra):
    out = tmp_path / "o.csv"
    assert run("simulate-mse", "--sizes", 20, "--reps", 2, "--seed", 1, *extra, "--out", out) == 1
    assert not out.exists()


def test_simulate_mse_requires_seed(tmp_path):
    assert run("simulate-mse", "--sizes", 20, "--reps", 2, "--out", tmp_path / "o.csv") == 1


def test_simulate_limit_one_cause(tmp_path):
    out = tmp_path / "lim"
    assert run("simulate-limit", "--out-dir", out, "--reps", 2, "--seed", 1, "--c", 2, "--h", 0.02,
               "--F0", "0.4", "--f0", "0.3", "--g0", "0.5") == 0
    for r in range(2):
        rows = np.genfromtxt(out / f"rep{r}.csv", delimiter=",", names=True)
        np.testing.assert_allclose(rows["Hhat_1"], rows["Htilde_1"], atol=1e-9)
        diag = json.loads((out / f"rep{r}.json").read_text())
        assert diag["converged"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["nonconverged"] == 0 and summary["reps"] == 2


def test_simulate_limit_zero_noise_gives_parabolas(tmp_path):
    out = tmp_path / "lim"
    assert run("simulate-limit", "--out-dir", out, "--reps", 1, "--seed", 0, "--c", 1, "--h", 0.01,
               "--zero-noise") == 0
    rows = np.genfromtxt(out / "rep0.csv", delimiter=",", names=True)
    f0 = (np.exp(-1) / 3, 4 * np.exp(-2) / 3)
    for k in (1, 2):
        np.testing.assert_allclose(rows[f"Htilde_{k}"], 0.5 * f0[k - 1] * rows["t"] ** 2, atol=1e-12)
        np.testing.assert_allclose(rows[f"V_{k}"], 0.5 * f0[k - 1] * rows["t"] ** 2, atol=1e-12)


def test_simulate_limit_laws_hold(tmp_path):
    out = tmp_path / "lim"
    assert run("simulate-limit", "--out-dir", out, "--reps", 8, "--seed", 3, "--c", 3, "--h", 0.02) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["nonconverged"] == 0
    assert summary["sum_bound_violations"] == 0 and summary["naive_bound_violations"] == 0
    assert run("simulate-limit", "--out-dir", out, "--reps", 1, "--seed", 3) == 1


def test_simulate_limit_partial_params_is_usage_error(tmp_path):
    assert run("simulate-limit", "--out-dir", tmp_path, "--seed", 1, "--F0", "0.2,0.3") == 1


def test_localize(tmp_path):
    data, out, summ = tmp_path / "d.csv", tmp_path / "loc.csv", tmp_path / "loc.json"
    run("gen-data", "--n", 2000, "--seed", 2, "--out", data)
    assert run("localize", "--data", data, "--out", out, "--summary", summ, "--c", 2, "--h", 0.05) == 0
    rows = np.genfromtxt(out, delimiter=",", names=True)
    assert rows.size == 81
    assert set(json.loads(summ.read_text())) >= {"min_gap", "tau", "c"}


def test_json_sidecars_by_default(tmp_path, data_csv):
    meta = json.loads(data_csv.with_suffix(".json").read_text())
    assert meta["n"] == 300 and meta["seed"] == 4 and sum(meta["cause_counts"]) == 300
    est = tmp_path / "est.csv"
    assert run("estimate", "--data", data_csv, "--out", est, "--estimator", "naive") == 0
    cert = json.loads(est.with_suffix(".json").read_text())
    assert cert["estimator"] == "naive" and set(cert) >= {"loglik", "kkt_residual", "iterations", "converged"}
    # an existing sidecar also needs --force
    again = tmp_path / "other.csv"
    again.with_suffix(".json").write_text("{}")
    assert run("estimate", "--data", data_csv, "--out", again) == 1
