import csv
import os
import subprocess
import sys

import numpy as np
import pytest

from largevar.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, EXIT_SOLVER, main
from largevar.config import load_config, parse_config

HERE = os.path.dirname(__file__)
PANEL = os.path.join(HERE, "data", "synthetic_panel.csv")
REPO = os.path.dirname(HERE)
SIGNAL = ("output", "prices", "rates", "credit")


def _run(tmp_path, text, command, name="run.cfg", *extra):
    cfg = tmp_path / name
    cfg.write_text(text)
    out = tmp_path / "out"
    return main([command, "--config", str(cfg), "--out", str(out), *extra]), out


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


FIT = f"input = {PANEL}\ntransforms = log\nP = 2\nlam = 0.05\ngamma = 0.02\nalpha = 1\n"


def test_fit_writes_outputs(tmp_path):
    code, out = _run(tmp_path, FIT, "fit")
    assert code == EXIT_OK
    for f in ("coefficients_selected.csv", "coefficients_refit.csv", "support.csv", "summary.txt", "config_used.txt"):
        assert (out / f).exists()
    rows = _read(out / "coefficients_selected.csv")
    assert len(rows) == 2 * 5 * 5
    support = _read(out / "support.csv")
    nonzero = [r for r in rows if float(r["coefficient"]) != 0]
    assert len(support) == len(nonzero)
    summary = (out / "summary.txt").read_text()
    assert "output:" in summary and "|S1|" in summary
    assert parse_config((out / "config_used.txt").read_text()).P == (2,)


def test_fit_empty_support_says_zero_selected(tmp_path):
    code, out = _run(tmp_path, FIT.replace("lam = 0.05", "lam = 1000").replace("gamma = 0.02", "gamma = 1000"), "fit")
    assert code == EXIT_OK
    summary = (out / "summary.txt").read_text()
    assert summary.count(": 0 selected") == 5
    assert _read(out / "support.csv") == []


def test_fit_targets_restrict_summary(tmp_path):
    code, out = _run(tmp_path, FIT + "targets = rates\n", "fit")
    lines = (out / "summary.txt").read_text().splitlines()
    assert any(line.startswith("rates:") for line in lines)
    assert not any(line.startswith("output:") for line in lines)


def test_missing_variable_is_a_data_error(tmp_path, capsys):
    code, _ = _run(tmp_path, FIT + "variables = output, gdp\n", "fit")
    assert code == EXIT_DATA
    assert "gdp" in capsys.readouterr().err


def test_missing_input_file_is_a_data_error(tmp_path):
    code, _ = _run(tmp_path, "input = nowhere.csv\n", "fit")
    assert code == EXIT_DATA


def test_bad_config_is_a_config_error(tmp_path, capsys):
    code, _ = _run(tmp_path, FIT + "lamda = 0.1\n", "fit")
    assert code == EXIT_CONFIG
    assert "run.cfg:7" in capsys.readouterr().err


def test_solver_failure_exit_code(tmp_path):
    # every grid point fails: the training window is too short for P = 10
    text = FIT.replace("P = 2", "P = 10") + "window_len = 8\nT0 = 100\nT1 = 120\n"
    code, _ = _run(tmp_path, text, "evaluate")
    assert code == EXIT_SOLVER


def test_fit_byte_identical_across_runs(tmp_path):
    outs = []
    for k in range(2):
        cfg = tmp_path / f"c{k}.cfg"
        cfg.write_text(FIT)
        assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / f"o{k}")]) == EXIT_OK
        outs.append(tmp_path / f"o{k}")
    for f in ("coefficients_selected.csv", "coefficients_refit.csv", "support.csv", "summary.txt"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()


EVAL = f"input = {PANEL}\ntransforms = log\nlam = 0.05, 0.2\ngamma = 0.05, 0.2\nalpha = 1\nrefine_rounds = 0\nwindow_len = 100\nT0 = 150\n"


def test_evaluate_single_variable_single_row(tmp_path):
    code, out = _run(tmp_path, EVAL + "variables = output\nP = 1\nhorizons = 1\n", "evaluate")
    assert code == EXIT_OK
    rows = _read(out / "report.csv")
    assert len(rows) == 1
    assert rows[0]["j"] == "output" and rows[0]["h"] == "1" and rows[0]["P"] == "1"
    assert len(_read(out / "grid.csv")) == 4


def test_evaluate_benchmark_stub_gives_unit_rmsfe(tmp_path):
    code, out = _run(tmp_path, EVAL + "P = 1, 2\nhorizons = 1, 3\nforecaster = benchmark\n", "evaluate")
    assert code == EXIT_OK
    rows = _read(out / "report.csv")
    assert len(rows) == 5 * 2 * 2
    assert all(float(r["rmsfe"]) == 1.0 for r in rows)


def test_evaluate_synthetic_panel_beats_random_walk(tmp_path):
    code, out = _run(tmp_path, EVAL + "P = 2\nhorizons = 1, 3\n", "evaluate")
    assert code == EXIT_OK
    rows = _read(out / "report.csv")
    assert len(rows) == 5 * 2
    for r in rows:
        if r["j"] in SIGNAL:
            assert float(r["rmsfe"]) < 1.0, r


def test_evaluate_threads_do_not_change_results(tmp_path):
    text = EVAL + "variables = output, prices\nP = 1\nhorizons = 1\n"
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir()
    b.mkdir()
    assert _run(a, text, "evaluate")[0] == EXIT_OK
    assert _run(b, text, "evaluate", "run.cfg", "--threads", "2")[0] == EXIT_OK
    assert (a / "out" / "report.csv").read_bytes() == (b / "out" / "report.csv").read_bytes()


SIM = "experiment = recovery\nJ = 5\nP = 1\np0 = 1\nq0 = 1\nT_list = 100\ntrials = 1\n"


def test_simulate_smoke_one_row(tmp_path):
    code, out = _run(tmp_path, SIM, "simulate")
    assert code == EXIT_OK
    rows = _read(out / "recovery.csv")
    assert len(rows) == 1 and rows[0]["T"] == "100" and rows[0]["trials"] == "1"


def test_simulate_negative_schedule_is_config_error(tmp_path):
    code, _ = _run(tmp_path, SIM + "a_scale = -0.01\n", "simulate")
    assert code == EXIT_CONFIG


def test_simulate_seed_override(tmp_path):
    text = SIM.replace("trials = 1", "trials = 5").replace("T_list = 100", "T_list = 60")
    base = tmp_path / "a"
    other = tmp_path / "b"
    base.mkdir()
    other.mkdir()
    _run(base, text, "simulate", "run.cfg", "--seed", "1")
    _run(other, text, "simulate", "run.cfg", "--seed", "2")
    assert load_config(str(base / "run.cfg")).seed == 0
    assert parse_config((base / "out" / "config_used.txt").read_text()).seed == 1
    assert (base / "out" / "recovery.csv").read_bytes() != (other / "out" / "recovery.csv").read_bytes()


def test_simulate_dependence_smoke(tmp_path):
    text = "experiment = dependence\nk_list = 0, 2\ns = 2\ndep_T = 200\ndep_P = 10\ntrials = 3\npilot = 20\nkappa_budget = 500\n"
    code, out = _run(tmp_path, text, "simulate")
    assert code == EXIT_OK
    rows = _read(out / "dependence.csv")
    assert [r["k"] for r in rows] == ["0", "2"]


def test_repro_config_regenerates_frozen_table(tmp_path):
    from test_simulation import FROZEN_RECOVERY
    cfg = os.path.join(REPO, "demos", "configs", "recovery_repro.cfg")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    rows = _read(tmp_path / "recovery.csv")
    assert [int(r["T"]) for r in rows] == sorted(FROZEN_RECOVERY)
    for r in rows:
        got = [float(r[k]) for k in ("recovery_rate", "fp_rate", "mean_fp", "mean_fn")]
        np.testing.assert_allclose(got, FROZEN_RECOVERY[int(r["T"])], rtol=1e-9)


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "largevar.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "evaluate" in res.stdout and "--config" in res.stdout
    res = subprocess.run([sys.executable, "-m", "largevar.cli", "fit"], capture_output=True, text=True)
    assert res.returncode != 0
