import json
import subprocess
import sys

import numpy as np
import pytest

from spillnet.cli import build_parser, main, sample_path
from spillnet.panel import load_panel


def run(*args):
    return main([str(a) for a in args])


def test_help_documents_every_flag():
    out = subprocess.run([sys.executable, "-m", "spillnet.cli", "estimate", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for flag in ("--input", "--p", "--H", "--kind", "--lambda", "--grid", "--alpha", "--threads", "--out", "--user-p", "--factor-col", "--no-mask-indices"):
        assert flag in out.stdout
    sim = subprocess.run([sys.executable, "-m", "spillnet.cli", "simulate", "--help"], capture_output=True, text=True)
    assert sim.returncode == 0 and "--seed" in sim.stdout


def test_estimate_sample_writes_artifacts(tmp_path):
    assert run("estimate", "--sample", "--p", 1, "--H", 5, "--kind", "gfevd", "--out", tmp_path) == 0
    for name in ("fevd_table.csv", "fevd_table.json", "selection.json", "summary.json", "network.dot"):
        assert (tmp_path / name).stat().st_size > 0
    sel = json.loads((tmp_path / "selection.json").read_text())
    assert sel["lambda"] == pytest.approx(np.log(500)) and sel["k_hat"] == len(sel["active_set"])


def test_estimate_is_byte_stable(tmp_path):
    for d in ("a", "b"):
        assert run("estimate", "--sample", "--kind", "fevd", "--out", tmp_path / d) == 0
    for name in ("fevd_table.json", "selection.json", "summary.json", "network.dot", "fevd_table.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_missing_input_exit_one(tmp_path, capsys):
    assert run("estimate", "--input", tmp_path / "absent.csv", "--out", tmp_path) == 1
    assert "absent.csv" in capsys.readouterr().err


def test_bad_lambda_exit_one(tmp_path):
    assert run("estimate", "--sample", "--lambda", "big", "--out", tmp_path) == 1


def test_usage_error_exit_one():
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args(["estimate", "--kind", "svd"])
    assert exc.value.code == 1


def test_dense_indices_flag(tmp_path):
    run("estimate", "--sample", "--kind", "fevd", "--out", tmp_path / "m")
    run("estimate", "--sample", "--kind", "fevd", "--no-mask-indices", "--out", tmp_path / "d")
    masked = json.loads((tmp_path / "m" / "summary.json").read_text())
    dense = json.loads((tmp_path / "d" / "summary.json").read_text())
    assert dense["indices_on"] == "dense" and dense["total_index"] >= masked["total_index"]
    assert dense["in_deg"] == masked["in_deg"]


def test_user_p_cholesky_matches_default(tmp_path):
    run("estimate", "--sample", "--kind", "fevd", "--out", tmp_path / "chol")
    fit = json.loads((tmp_path / "chol" / "var_fit.json").read_text())
    raw = load_panel(sample_path()).observations
    scales = raw.std(axis=0, ddof=1)
    sigma_raw = np.asarray(fit["sigma"]) * np.outer(scales, scales)
    np.savetxt(tmp_path / "p.csv", np.linalg.cholesky(sigma_raw), delimiter=",", fmt="%.17g")
    assert run("estimate", "--sample", "--kind", "fevd", "--user-p", tmp_path / "p.csv", "--out", tmp_path / "user") == 0
    a = json.loads((tmp_path / "chol" / "fevd_table.json").read_text())["shares"]
    b = json.loads((tmp_path / "user" / "fevd_table.json").read_text())["shares"]
    np.testing.assert_allclose(a, b, atol=1e-8)
    np.savetxt(tmp_path / "bad.csv", np.eye(10), delimiter=",")
    assert run("estimate", "--sample", "--kind", "fevd", "--user-p", tmp_path / "bad.csv", "--out", tmp_path / "x") == 1


def test_factor_column(tmp_path):
    assert run("estimate", "--sample", "--factor-col", "s1", "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert doc["labels"][0] == "s2" and len(doc["labels"]) == 9
    assert run("estimate", "--sample", "--factor-col", "zz", "--out", tmp_path) == 1


def test_tune_single_candidate_echoed(tmp_path):
    assert run("tune", "--sample", "--H", 2, "--grid", "3.5", "--grid-scale", "lambda", "--out", tmp_path, "--threads", 1) == 0
    doc = json.loads((tmp_path / "tuning.json").read_text())
    assert doc["lambda_star"] == 3.5 and "first" in doc["tie_rule"]


def test_tune_grid_file_with_duplicates(tmp_path):
    (tmp_path / "grid.txt").write_text("2\n2\n5\n")
    assert run("tune", "--sample", "--H", 2, "--grid", tmp_path / "grid.txt", "--out", tmp_path, "--threads", 1) == 0
    doc = json.loads((tmp_path / "tuning.json").read_text())
    assert doc["constants"] == [2.0, 2.0, 5.0] and doc["best_index"] != 1
    assert (tmp_path / "tuning_msfe.csv").read_text().count("\n") == 4


def test_estimate_with_grid_tunes_first(tmp_path):
    assert run("estimate", "--sample", "--H", 2, "--grid", "1,2", "--out", tmp_path, "--threads", 1) == 0
    sel = json.loads((tmp_path / "selection.json").read_text())
    assert sel["lambda_source"] == "tuned" and sel["lambda"] == sel["tuning"]["lambda_star"]


def test_simulate_single_replication(tmp_path):
    assert run("simulate", "--dgp", "S1", "--reps", 1, "--T", 300, "--out", tmp_path, "--threads", 1) == 0
    assert (tmp_path / "mc_report.csv").read_text().count("\n") == 2
    assert (tmp_path / "cstar_hist.csv").exists()


def test_simulate_from_config(tmp_path):
    (tmp_path / "study.txt").write_text("dgp = S2\nT = 300\nH = 2\nkind = fevd\nreps = 2\nlambda_rule = log\n")
    assert run("simulate", "--config", tmp_path / "study.txt", "--out", tmp_path, "--threads", 1) == 0
    doc = json.loads((tmp_path / "mc_report.json").read_text())
    assert doc["config"]["dgp"] == "S2" and len(doc["replications"]) == 2


def test_export_round_trip(tmp_path):
    run("estimate", "--sample", "--kind", "fevd", "--out", tmp_path)
    assert run("export", "--input", tmp_path / "fevd_table.json", "--format", "csv", "--out", tmp_path / "again.csv") == 0
    assert (tmp_path / "again.csv").read_text() == (tmp_path / "fevd_table.csv").read_text()
    assert run("export", "--input", tmp_path / "fevd_table.json", "--format", "dot", "--out", tmp_path / "g.dot") == 0
    assert (tmp_path / "g.dot").read_text() == (tmp_path / "network.dot").read_text()
    assert run("export", "--input", tmp_path / "nothing.json") == 1


def test_threads_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("SPILLNET_THREADS", "abc")
    assert run("tune", "--sample", "--H", 1, "--grid", "1", "--out", tmp_path) == 1
    monkeypatch.setenv("SPILLNET_THREADS", "2")
    assert run("tune", "--sample", "--H", 1, "--grid", "1", "--out", tmp_path) == 0
