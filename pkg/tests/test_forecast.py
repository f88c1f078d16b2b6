import numpy as np
import pytest

from largevar.errors import DataError, SolverError
from largevar.estimators import PenaltySpec
from largevar.forecast import (HyperGrid, RollingConfig, benchmark_rw_drift, forecast_at_origin, forecast_h,
                               forecast_path, grid_search, rolling_evaluate)
from largevar.panel import Panel, StandardizationWeights
from largevar.simulation import simulate_var
from largevar.solvers import SolverConfig

OLS = PenaltySpec.no_grouping(0.0, 0.0)
TIGHT = SolverConfig(tolerance=1e-12, max_sweeps=200_000)


def _ar_panel(J=2, T=120, seed=0, coef=0.6):
    rng = np.random.default_rng(seed)
    B = np.zeros((1, J, J))
    B[0] = np.eye(J) * coef
    return Panel(simulate_var(B, T, 1.0, rng))


# ---------------------------------------------------------------- point forecasts

def test_zero_coefficients_forecast_the_means():
    w = StandardizationWeights(np.array([2.0, 0.5]), np.array([10.0, -3.0]))
    hist = np.array([[1.0, 2.0], [7.0, 4.0]])
    for h in (1, 4):
        np.testing.assert_allclose(forecast_h(np.zeros((2, 2, 2)), hist, h, w), [10.0, -3.0])


def test_univariate_ar_three_steps():
    assert forecast_h(np.array([[[0.5]]]), np.array([2.0]), 3)[0] == pytest.approx(0.25)


def test_bivariate_two_lag_manual_recursion():
    B = np.zeros((2, 2, 2))
    B[0] = [[0.5, 0.1], [0.2, 0.3]]
    B[1] = [[0.0, -0.2], [0.1, 0.0]]
    hist = np.array([[1.0, -1.0], [2.0, 0.5]])  # oldest first
    y1 = hist[1] @ B[0] + hist[0] @ B[1]
    y2 = y1 @ B[0] + hist[1] @ B[1]
    y3 = y2 @ B[0] + y1 @ B[1]
    np.testing.assert_allclose(forecast_path(B, hist, 3), [y1, y2, y3], atol=1e-15)


def test_forecast_errors():
    with pytest.raises(DataError):
        forecast_path(np.zeros((2, 1, 1)), np.ones(1), 1)
    with pytest.raises(DataError):
        forecast_path(np.zeros((1, 2, 2)), np.ones((3, 3)), 1)
    with pytest.raises(DataError):
        forecast_path(np.zeros((1, 1, 1)), np.ones(3), 0)


def test_benchmark_examples():
    assert benchmark_rw_drift([0.0, 1.0, 2.0, 3.0], 2) == pytest.approx(5.0)
    y = np.array([[1.0, 5.0], [4.0, 3.0], [2.0, 6.0]])
    # hand formula: last + h * mean first difference
    np.testing.assert_allclose(benchmark_rw_drift(y, 3), [2.0 + 3 * 0.5, 6.0 + 3 * 0.5])
    with pytest.raises(DataError):
        benchmark_rw_drift([1.0], 1)


# ---------------------------------------------------------------- rolling evaluation

def test_perfect_foresight_has_zero_msfe():
    panel = _ar_panel()
    cfg = RollingConfig(T0=40, T1=119, window_len=30, horizons=(1, 3))

    def oracle(window, t, hs):
        return {h: panel.data[t + h] for h in hs}

    rep = rolling_evaluate(panel, None, cfg, forecaster=oracle)
    assert np.all(rep.msfe == 0) and np.all(rep.rmsfe == 0)


def test_benchmark_forecaster_has_unit_rmsfe():
    panel = _ar_panel(seed=1)
    cfg = RollingConfig(T0=40, T1=119, window_len=30, horizons=(1, 2, 4))
    rep = rolling_evaluate(panel, None, cfg, forecaster=lambda w, t, hs: {h: benchmark_rw_drift(w.data, h) for h in hs})
    np.testing.assert_array_equal(rep.rmsfe, 1.0)


def test_rmsfe_identity_and_term_count():
    panel = _ar_panel(seed=2, J=3)
    cfg = RollingConfig(T0=50, T1=110, window_len=40, horizons=(1, 2, 5))
    rep = rolling_evaluate(panel, PenaltySpec.no_grouping(0.05, 0.05), cfg, P=2)
    np.testing.assert_allclose(rep.rmsfe, rep.msfe / rep.benchmark_msfe, rtol=1e-15)
    for k, h in enumerate(cfg.horizons):
        assert cfg.n_terms(h) == 110 - 50 - h + 1
        assert np.all(rep.n_terms[:, k] == cfg.n_terms(h))
        np.testing.assert_array_equal(rep.origins[h], np.arange(50, 110 - h + 1))
        np.testing.assert_allclose(rep.msfe[:, k], np.mean((rep.forecasts[h] - rep.actuals[h]) ** 2, axis=0))


def test_univariate_hand_loop_oracle():
    rng = np.random.default_rng(3)
    y = np.empty(60)
    y[0] = 0.0
    for t in range(1, 60):
        y[t] = 1.0 + 0.7 * y[t - 1] + rng.standard_normal()
    panel = Panel(y)
    L, T0, T1 = 25, 29, 59  # 30 scored points at h=1
    cfg = RollingConfig(T0=T0, T1=T1, window_len=L)
    rep = rolling_evaluate(panel, OLS, cfg, solver=TIGHT)
    sq, bsq = [], []
    for t in range(T0, T1):
        w = y[t - L + 1:t + 1]
        m, s = w.mean(), w.std()
        z = (w - m) / s
        b = (z[:-1] @ z[1:]) / (z[:-1] @ z[:-1])
        f = b * z[-1] * s + m
        bench = w[-1] + (w[-1] - w[0]) / (L - 1)
        sq.append((f - y[t + 1]) ** 2)
        bsq.append((bench - y[t + 1]) ** 2)
    assert len(sq) == 30 == rep.n_terms[0, 0]
    assert rep.msfe[0, 0] == pytest.approx(np.mean(sq), rel=1e-10)
    assert rep.rmsfe[0, 0] == pytest.approx(np.mean(sq) / np.mean(bsq), rel=1e-10)


def test_refit_every_reuses_coefficients():
    panel = _ar_panel(seed=4)
    cfg1 = RollingConfig(T0=40, T1=100, window_len=30, refit_every=1)
    cfg5 = RollingConfig(T0=40, T1=100, window_len=30, refit_every=5)
    spec = PenaltySpec.no_grouping(0.05, 0.05)
    r1 = rolling_evaluate(panel, spec, cfg1)
    r5 = rolling_evaluate(panel, spec, cfg5)
    np.testing.assert_allclose(r1.forecasts[1][::5], r5.forecasts[1][::5], atol=1e-12)
    assert not np.allclose(r1.forecasts[1], r5.forecasts[1])


def test_no_leakage_from_future_rows():
    panel = _ar_panel(J=3, seed=5)
    t = 70
    tampered = panel.data.copy()
    tampered[t + 1:] = 1e6
    spec = PenaltySpec.no_grouping(0.05, 0.02)
    a, fa, _ = forecast_at_origin(panel, t, 2, spec, 40, (1, 2, 3))
    b, fb, _ = forecast_at_origin(Panel(tampered), t, 2, spec, 40, (1, 2, 3))
    for h in (1, 2, 3):
        np.testing.assert_array_equal(a[h], b[h])
    np.testing.assert_array_equal(fa.B_refit.B, fb.B_refit.B)
    cfg = RollingConfig(T0=50, T1=t, window_len=40, horizons=(1, 3))
    ra = rolling_evaluate(panel, spec, cfg, P=2)
    tampered2 = panel.data.copy()
    tampered2[t + 1:] = -1e6
    rb = rolling_evaluate(Panel(tampered2), spec, cfg, P=2)
    np.testing.assert_array_equal(ra.msfe, rb.msfe)


def test_rolling_config_validation():
    with pytest.raises(DataError):
        RollingConfig(T0=10, T1=10, window_len=5)
    with pytest.raises(DataError):
        RollingConfig(T0=1, T1=10, window_len=5, horizons=(0,))
    with pytest.raises(DataError):
        rolling_evaluate(_ar_panel(), OLS, RollingConfig(T0=3, T1=50, window_len=10))
    with pytest.raises(DataError):
        rolling_evaluate(_ar_panel(), OLS, RollingConfig(T0=30, T1=500, window_len=10))
    with pytest.raises(DataError):
        rolling_evaluate(_ar_panel(), None, RollingConfig(T0=30, T1=50, window_len=10))


def test_report_rows():
    panel = _ar_panel(seed=6)
    rep = rolling_evaluate(panel, PenaltySpec.no_grouping(0.1, 0.05), RollingConfig(40, 80, 30, (1, 2)))
    rows = rep.rows()
    assert len(rows) == 4
    assert rows[0]["lam"] == 0.1 and rows[0]["h"] == 1 and rows[1]["h"] == 2


# ---------------------------------------------------------------- grid search

def test_grid_single_point():
    panel = _ar_panel(seed=7)
    cfg = RollingConfig(40, 100, 30)
    g = grid_search(panel, "no_grouping", HyperGrid((0.1,), (0.05,), alpha=(1.0,)), cfg)
    rep = rolling_evaluate(panel, PenaltySpec.no_grouping(0.1, 0.05, 1.0), cfg)
    assert g.choice[0] == (0.1, 0.05, g.choice[0][2], 1.0)
    assert g.best_objective[0] == pytest.approx(float(np.mean(rep.rmsfe[:, 0])))
    assert len(g.table) == 1


def test_grid_prefers_shrinkage_on_white_noise():
    rng = np.random.default_rng(8)
    panel = Panel(rng.standard_normal((140, 6)))
    cfg = RollingConfig(60, 139, 30)
    g = grid_search(panel, "no_grouping", HyperGrid((0.0, 10.0), (0.0, 10.0), alpha=(1.0,), refine_rounds=0), cfg, P=3)
    assert g.choice[0][:2] == (10.0, 10.0)
    obj = {(r["lam"], r["gamma"]): r["objective_0"] for r in g.table}
    assert obj[(10.0, 10.0)] < obj[(0.0, 0.0)]


def test_per_variable_objective_differs_from_mean():
    rng = np.random.default_rng(9)
    B = np.zeros((1, 3, 3))
    B[0] = np.diag([0.9, 0.0, 0.0])
    panel = Panel(simulate_var(B, 150, 1.0, rng))
    cfg = RollingConfig(60, 149, 40)
    grid = HyperGrid((0.0, 0.05, 1.0), (0.0, 0.05, 1.0), alpha=(1.0,), refine_rounds=0)
    mean = grid_search(panel, "no_grouping", grid, cfg)
    per = grid_search(panel, "no_grouping", grid, cfg, objective="per_variable")
    assert len(set(per.choice.values())) > 1
    assert isinstance(per.best.lam, tuple)
    # each variable does at least as well under its own choice
    mean_rmsfe = next(r for r in mean.table if (r["lam"], r["gamma"]) == mean.choice[0][:2])
    for j, name in enumerate(panel.names):
        assert per.best_rmsfe[j] <= mean_rmsfe[f"rmsfe_{name}"] + 1e-15


def test_refinement_never_worse_than_coarse():
    panel = _ar_panel(J=3, seed=10)
    cfg = RollingConfig(50, 110, 40)
    g = grid_search(panel, "universal", HyperGrid((0.01, 0.3), (0.01, 0.3), alpha=(1.0,)), cfg)
    assert g.best_objective[0] <= g.coarse_objective[0]
    assert len(g.table) > 4


def test_segment_objective():
    panel = _ar_panel(J=4, seed=11)
    cfg = RollingConfig(50, 110, 40)
    grid = HyperGrid((0.05, 0.5), (0.05,), eta=(0.05, 0.5), alpha=(1.0,), refine_rounds=0)
    g = grid_search(panel, "segmentized", grid, cfg, objective="segment", segments=[[0, 1], [2, 3]])
    assert set(g.choice) == {0, 1}
    assert g.best.mode == "segmentized"


def test_grid_all_points_fail():
    panel = _ar_panel(seed=12)
    with pytest.raises(SolverError, match="every grid point failed"):
        grid_search(panel, "no_grouping", HyperGrid((0.1,), (0.1,)), RollingConfig(40, 100, 5), P=4)


def test_grid_validation():
    panel = _ar_panel()
    cfg = RollingConfig(40, 100, 30)
    with pytest.raises(DataError):
        grid_search(panel, "universal", HyperGrid((0.1,), (0.1,)), cfg, objective="per_variable")
    with pytest.raises(DataError):
        grid_search(panel, "segmentized", HyperGrid((0.1,), (0.1,)), cfg)
    with pytest.raises(DataError):
        grid_search(panel, "no_grouping", HyperGrid((0.1,), (0.1,)), cfg, horizon=2)
    with pytest.raises(DataError):
        HyperGrid((-1.0,), (0.1,))
