"""Iterated VAR forecasts, rolling out-of-sample evaluation and hyperparameter search.

Time indices are panel row numbers. A forecast made at origin ``t`` may use
rows ``<= t`` only; the model is fitted on the trailing ``window_len`` rows
ending at ``t``, standardized with statistics from that window.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DataError, LargeVarError, SolverError
from .estimators import MODES, FitResult, PenaltySpec, fit_var
from .panel import Panel, StandardizationWeights, build_lag_design, standardize
from .solvers import SolverConfig

__all__ = [
    "RollingConfig",
    "ForecastReport",
    "HyperGrid",
    "GridResult",
    "forecast_path",
    "forecast_h",
    "benchmark_rw_drift",
    "forecast_at_origin",
    "rolling_evaluate",
    "grid_search",
    "REPORT_COLUMNS",
]

REPORT_COLUMNS = ("mode", "j", "h", "P", "lam", "gamma", "eta", "alpha",
                  "msfe", "benchmark_msfe", "rmsfe", "n_terms", "converged_fraction")


def _history_array(history) -> np.ndarray:
    data = history.data if isinstance(history, Panel) else np.asarray(history, dtype=float)
    return data[:, None] if data.ndim == 1 else data


def forecast_path(fit: FitResult | np.ndarray, history, h: int, weights: StandardizationWeights | None = None,
                  which: str = "refit") -> np.ndarray:
    """Forecasts for steps 1..h (h x J), feeding each forecast back as a lag.

    ``fit`` is a :class:`FitResult` or a P x J x J coefficient array. With
    ``weights`` the history is in original units: it is standardized before
    the recursion and forecasts are mapped back.
    """
    if h < 1:
        raise DataError(f"horizon must be >= 1, got {h}")
    B = fit.coefficients(which).B if isinstance(fit, FitResult) else np.asarray(fit, dtype=float)
    P, J = B.shape[0], B.shape[1]
    hist = _history_array(history)
    if hist.shape[0] < P:
        raise DataError(f"forecasting needs {P} history rows, got {hist.shape[0]}")
    if hist.shape[1] != J:
        raise DataError(f"history has {hist.shape[1]} variables, model has {J}")
    z = weights.apply(hist[-P:]) if weights is not None else hist[-P:].copy()
    lags = list(z[::-1])  # newest first
    out = np.empty((h, J))
    for step in range(h):
        y = np.zeros(J)
        for p in range(P):
            y += lags[p] @ B[p]
        out[step] = y
        lags = [y] + lags[:-1]
    return weights.invert(out) if weights is not None else out


def forecast_h(fit, history, h: int, weights: StandardizationWeights | None = None,
               which: str = "refit") -> np.ndarray:
    """h-step-ahead iterated forecast of every variable."""
    return forecast_path(fit, history, h, weights, which)[-1]


def benchmark_rw_drift(history, h: int) -> np.ndarray | float:
    """Random walk with drift: last value plus h times the mean first difference."""
    y = np.asarray(history, dtype=float)
    if y.shape[0] < 2:
        raise DataError("random walk with drift needs at least 2 observations")
    drift = (y[-1] - y[0]) / (y.shape[0] - 1)
    out = y[-1] + h * drift
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class RollingConfig:
    """Evaluation origins ``T0..T1-h`` with a trailing training window.

    ``T0`` and ``T1`` are row indices of the panel (``T1`` is the last row
    used as an actual value).
    """

    T0: int
    T1: int
    window_len: int
    horizons: tuple[int, ...] = (1,)
    refit_every: int = 1

    def __post_init__(self):
        object.__setattr__(self, "horizons", tuple(int(h) for h in self.horizons))
        if not self.T0 < self.T1:
            raise DataError(f"need T0 < T1, got {self.T0}, {self.T1}")
        if not self.horizons or any(h < 1 for h in self.horizons):
            raise DataError("horizons must be positive integers")
        if self.window_len < 2:
            raise DataError("window_len must be at least 2")
        if self.refit_every < 1:
            raise DataError("refit_every must be positive")

    def origins(self) -> range:
        return range(self.T0, self.T1 - min(self.horizons) + 1)

    def n_terms(self, h: int) -> int:
        return self.T1 - self.T0 - h + 1


@dataclass(frozen=True)
class ForecastReport:
    """MSFE and RMSFE per (variable, horizon), plus the per-origin forecasts.

    ``msfe`` etc. are J x H arrays in the order of ``horizons``.
    ``forecasts[h]`` and ``benchmarks[h]`` are (number of origins for h) x J;
    ``actuals[h]`` likewise, aligned with ``origins[h]``.
    """

    names: tuple[str, ...]
    horizons: tuple[int, ...]
    P: int
    spec: PenaltySpec | None
    msfe: np.ndarray
    benchmark_msfe: np.ndarray
    rmsfe: np.ndarray
    n_terms: np.ndarray
    origins: Mapping[int, np.ndarray] = field(repr=False)
    forecasts: Mapping[int, np.ndarray] = field(repr=False)
    actuals: Mapping[int, np.ndarray] = field(repr=False)
    benchmarks: Mapping[int, np.ndarray] = field(repr=False)
    converged_fraction: float = 1.0
    failures: tuple[tuple[int, str], ...] = ()
    refit_every: int = 1

    def value(self, j: int, h: int, what: str = "rmsfe") -> float:
        return float(getattr(self, what)[j, self.horizons.index(h)])

    def rows(self) -> list[dict]:
        out = []
        mode = self.spec.mode if self.spec is not None else "custom"
        for j in range(len(self.names)):
            params = self.spec.params_for(j) if self.spec is not None else \
                {"lam": math.nan, "gamma": math.nan, "eta": math.nan, "alpha": math.nan}
            for k, h in enumerate(self.horizons):
                out.append({
                    "mode": mode, "j": self.names[j], "h": h, "P": self.P,
                    **params,
                    "msfe": self.msfe[j, k], "benchmark_msfe": self.benchmark_msfe[j, k],
                    "rmsfe": self.rmsfe[j, k], "n_terms": int(self.n_terms[j, k]),
                    "converged_fraction": self.converged_fraction,
                })
        return out


def _window_design(panel: Panel, t: int, window_len: int, P: int):
    start = t - window_len + 1
    if start < 0:
        raise DataError(f"origin {t} needs {window_len} rows of history")
    window = panel.rows(start, t + 1)
    if window_len < P + 2:
        raise DataError(f"window of {window_len} rows is too short for P={P}")
    std_panel, weights = standardize(window)
    return window, std_panel, weights, build_lag_design(std_panel, P)


def forecast_at_origin(panel: Panel, t: int, P: int, spec: PenaltySpec, window_len: int,
                       horizons: Sequence[int], solver: SolverConfig = SolverConfig(),
                       warm: FitResult | None = None, which: str = "refit",
                       _cache: dict | None = None) -> tuple[dict[int, np.ndarray], FitResult, StandardizationWeights]:
    """Fit on rows ``t-window_len+1..t`` and forecast every horizon from origin ``t``."""
    key = (t, window_len, P)
    if _cache is not None and key in _cache:
        window, std_panel, weights, design = _cache[key]
    else:
        window, std_panel, weights, design = _window_design(panel, t, window_len, P)
        if _cache is not None:
            _cache[key] = (window, std_panel, weights, design)
    fit = fit_var(design, spec, solver, warm=warm)
    path = forecast_path(fit, std_panel, max(horizons), which=which)
    return {h: weights.invert(path[h - 1]) for h in horizons}, fit, weights


Forecaster = Callable[[Panel, int, Sequence[int]], Mapping[int, np.ndarray]]


def rolling_evaluate(panel: Panel, spec: PenaltySpec | None, cfg: RollingConfig, P: int = 1,
                     solver: SolverConfig = SolverConfig(), forecaster: Forecaster | None = None,
                     which: str = "refit", _cache: dict | None = None) -> ForecastReport:
    """Rolling-origin evaluation with MSFE and RMSFE against random walk with drift.

    For every origin t in ``T0..T1-h`` the model is fitted (every
    ``refit_every`` origins, otherwise the last fit is reused on the new
    history) and the forecast of ``t+h`` is scored. ``forecaster`` replaces the
    model: it receives the training window, the origin and the horizons and
    returns a mapping ``h -> J-vector``. Fit failures are recorded in
    ``failures`` and their terms left out of the averages.
    """
    if forecaster is None and spec is None:
        raise DataError("either a penalty spec or a forecaster is required")
    if spec is not None:
        spec.check_dims(panel.J)
    if cfg.T1 > panel.T - 1:
        raise DataError(f"T1={cfg.T1} beyond the last panel row {panel.T - 1}")
    if cfg.T0 - cfg.window_len + 1 < 0:
        raise DataError(f"T0={cfg.T0} leaves fewer than {cfg.window_len} training rows")
    if forecaster is None and cfg.window_len < P + 2:
        raise DataError(f"window_len {cfg.window_len} must be at least P + 2 = {P + 2}")

    horizons = cfg.horizons
    J = panel.J
    store = {h: {"t": [], "f": [], "a": [], "b": []} for h in horizons}
    failures = []
    fit = None
    weights = None
    n_fits = n_conv = 0
    for k, t in enumerate(cfg.origins()):
        hs = [h for h in horizons if t + h <= cfg.T1]
        window = panel.rows(t - cfg.window_len + 1, t + 1)
        try:
            if forecaster is not None:
                preds = {h: np.asarray(v, dtype=float) for h, v in forecaster(window, t, hs).items()}
            elif fit is None or k % cfg.refit_every == 0:
                preds, fit, weights = forecast_at_origin(panel, t, P, spec, cfg.window_len, hs, solver,
                                                         warm=fit, which=which, _cache=_cache)
                n_fits += 1
                n_conv += fit.all_converged
            else:
                path = forecast_path(fit, window.data, max(hs), weights, which)
                preds = {h: path[h - 1] for h in hs}
        except LargeVarError as exc:
            failures.append((t, str(exc)))
            fit = None
            continue
        for h in hs:
            store[h]["t"].append(t)
            store[h]["f"].append(preds[h])
            store[h]["a"].append(panel.data[t + h])
            store[h]["b"].append(benchmark_rw_drift(window.data, h))

    H = len(horizons)
    msfe = np.full((J, H), np.nan)
    bmsfe = np.full((J, H), np.nan)
    nterm = np.zeros((J, H), dtype=int)
    origins, fc, ac, bc = {}, {}, {}, {}
    for k, h in enumerate(horizons):
        s = store[h]
        origins[h] = np.array(s["t"], dtype=int)
        fc[h] = np.array(s["f"]).reshape(-1, J)
        ac[h] = np.array(s["a"]).reshape(-1, J)
        bc[h] = np.array(s["b"]).reshape(-1, J)
        n = len(s["t"])
        nterm[:, k] = n
        if n:
            msfe[:, k] = np.mean((fc[h] - ac[h]) ** 2, axis=0)
            bmsfe[:, k] = np.mean((bc[h] - ac[h]) ** 2, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        rmsfe = msfe / bmsfe
    conv = n_conv / n_fits if n_fits else (1.0 if forecaster is not None else 0.0)
    return ForecastReport(tuple(panel.names), horizons, P, spec, msfe, bmsfe, rmsfe, nterm,
                          origins, fc, ac, bc, conv, tuple(failures), cfg.refit_every)


@dataclass(frozen=True)
class HyperGrid:
    """Coarse grid of hyperparameters plus the refinement schedule.

    ``eta`` is used only in segmentized mode.
    """

    lam: tuple[float, ...]
    gamma: tuple[float, ...]
    eta: tuple[float, ...] = (0.0,)
    alpha: tuple[float, ...] = (1.0, 2.0)
    refine_factor: int = 3
    refine_rounds: int = 1

    def __post_init__(self):
        for name in ("lam", "gamma", "eta", "alpha"):
            vals = tuple(sorted(float(v) for v in np.atleast_1d(getattr(self, name))))
            if not vals:
                raise DataError(f"grid for {name} is empty")
            if any(not v >= 0 for v in vals):
                raise DataError(f"grid for {name} must be non-negative")
            object.__setattr__(self, name, vals)
        if self.refine_factor < 2 and self.refine_rounds > 0:
            raise DataError("refine_factor must be at least 2")
        if self.refine_rounds < 0:
            raise DataError("refine_rounds must be non-negative")

    def points(self, mode: str) -> list[tuple[float, float, float, float]]:
        etas = self.eta if mode == "segmentized" else (math.nan,)
        return sorted(itertools.product(self.lam, self.gamma, etas, self.alpha), key=_point_key)


def _point_key(pt):
    return tuple(-1.0 if math.isnan(v) else v for v in pt)


def _refine_axis(values: Sequence[float], best: float, factor: int) -> list[float]:
    vals = sorted(set(values))
    if len(vals) < 2 or math.isnan(best):
        return [best]
    i = vals.index(best)
    out = {best}
    for nb in ([vals[i - 1]] if i > 0 else []) + ([vals[i + 1]] if i + 1 < len(vals) else []):
        for k in range(1, factor):
            frac = k / factor
            if best > 0 and nb > 0:
                out.add(best * (nb / best) ** frac)
            else:
                out.add(best + (nb - best) * frac)
    return sorted(out)


def _spec_for(mode: str, pt, segments, decay) -> PenaltySpec:
    lam, gamma, eta, alpha = pt
    if mode == "universal":
        return PenaltySpec.universal(lam, gamma, alpha, decay)
    if mode == "no_grouping":
        return PenaltySpec.no_grouping(lam, gamma, alpha, decay)
    return PenaltySpec.segmentized(segments, lam, gamma, eta, alpha, decay)


@dataclass(frozen=True)
class GridResult:
    """Outcome of a grid search.

    ``best`` combines the winners (per column or per segment when the
    objective is individualized). ``choice[u]`` is the winning grid point of
    unit ``u`` (``0`` for the mean objective, column index for
    ``per_variable``, segment index for ``segment``) and ``best_rmsfe[j]`` the
    RMSFE of variable j at the point chosen for it. ``table`` has one row per
    evaluated point.
    """

    best: PenaltySpec
    choice: Mapping[int, tuple]
    best_rmsfe: np.ndarray
    best_objective: Mapping[int, float]
    coarse_objective: Mapping[int, float]
    table: tuple[dict, ...]
    horizon: int
    objective: str


def _evaluate_point(panel, mode, pt, segments, decay, cfg, P, solver, which, cache):
    spec = _spec_for(mode, pt, segments, decay)
    try:
        rep = rolling_evaluate(panel, spec, cfg, P, solver, which=which, _cache=cache)
        return rep, None
    except LargeVarError as exc:
        return None, str(exc)


def grid_search(panel: Panel, mode: str, grid: HyperGrid, cfg: RollingConfig, P: int = 1,
                objective: str = "mean", horizon: int | None = None,
                solver: SolverConfig = SolverConfig(), segments=None, decay: str = "power",
                which: str = "refit", n_jobs: int = 1) -> GridResult:
    """Rolling-scheme search: coarse pass over the grid, then local refinement.

    ``objective`` is ``mean`` (average RMSFE over all variables),
    ``per_variable`` (each variable keeps its own best point; no_grouping
    only) or ``segment`` (average over each segment's members; segmentized
    only). Refinement subdivides the spacing to each neighbouring coarse value
    ``refine_factor`` times (geometrically when both ends are positive) around
    every winning point, with alpha held at the winner's value. Ties go to
    the lexicographically smallest ``(lam, gamma, eta, alpha)``.
    """
    if mode not in MODES:
        raise DataError(f"unknown mode {mode!r}")
    if objective not in ("mean", "per_variable", "segment"):
        raise DataError(f"unknown objective {objective!r}")
    if objective == "per_variable" and mode != "no_grouping":
        raise DataError("the per_variable objective needs no_grouping mode")
    if objective == "segment" and mode != "segmentized":
        raise DataError("the segment objective needs segmentized mode")
    if mode == "segmentized" and not segments:
        raise DataError("segmentized mode needs segments")
    h = cfg.horizons[0] if horizon is None else int(horizon)
    if h not in cfg.horizons:
        raise DataError(f"horizon {h} not among the evaluated horizons {cfg.horizons}")
    hk = cfg.horizons.index(h)
    J = panel.J
    if objective == "mean":
        units = {0: list(range(J))}
    elif objective == "per_variable":
        units = {j: [j] for j in range(J)}
    else:
        units = {s: list(seg) for s, seg in enumerate(segments)}

    results: dict[tuple, tuple] = {}
    cache: dict = {}

    def run(points):
        todo = [pt for pt in points if pt not in results]
        if n_jobs == 1:
            out = [_evaluate_point(panel, mode, pt, segments, decay, cfg, P, solver, which, cache) for pt in todo]
        else:
            from joblib import Parallel, delayed
            out = Parallel(n_jobs=n_jobs)(
                delayed(_evaluate_point)(panel, mode, pt, segments, decay, cfg, P, solver, which, None)
                for pt in todo)
        for pt, res in zip(todo, out):
            results[pt] = res

    def unit_value(pt, cols):
        rep, _ = results[pt]
        if rep is None:
            return math.inf
        v = rep.rmsfe[cols, hk]
        return float(np.mean(v)) if np.all(np.isfinite(v)) else math.inf

    def select():
        pts = sorted(results, key=_point_key)
        choice, value = {}, {}
        for u, cols in units.items():
            vals = [unit_value(pt, cols) for pt in pts]
            i = int(np.argmin(vals))
            choice[u], value[u] = pts[i], vals[i]
        return choice, value

    run(grid.points(mode))
    choice, value = select()
    if all(math.isinf(v) for v in value.values()):
        diag = "; ".join(f"{pt}: {results[pt][1]}" for pt in sorted(results, key=_point_key)[:10])
        raise SolverError(f"every grid point failed: {diag}")
    coarse = dict(value)

    axes = {"lam": grid.lam, "gamma": grid.gamma, "eta": grid.eta}
    for _ in range(grid.refine_rounds):
        new = set()
        for pt in set(choice.values()):
            lam, gamma, eta, alpha = pt
            etas = _refine_axis(axes["eta"], eta, grid.refine_factor) if mode == "segmentized" else [eta]
            for q in itertools.product(_refine_axis(axes["lam"], lam, grid.refine_factor),
                                       _refine_axis(axes["gamma"], gamma, grid.refine_factor),
                                       etas, [alpha]):
                new.add(q)
        run(sorted(new, key=_point_key))
        choice, value = select()

    best_rmsfe = np.full(J, np.nan)
    for u, cols in units.items():
        rep, _ = results[choice[u]]
        if rep is not None:
            best_rmsfe[cols] = rep.rmsfe[cols, hk]
    best = _combine(mode, choice, units, J, segments, decay)

    table = []
    for pt in sorted(results, key=_point_key):
        rep, err = results[pt]
        row = {"lam": pt[0], "gamma": pt[1], "eta": pt[2], "alpha": pt[3], "h": h, "P": P,
               "refit_every": cfg.refit_every, "error": err or ""}
        for u, cols in units.items():
            row[f"objective_{u}"] = unit_value(pt, cols)
        if rep is not None:
            for j in range(J):
                row[f"rmsfe_{panel.names[j]}"] = rep.rmsfe[j, hk]
        table.append(row)
    return GridResult(best, choice, best_rmsfe, value, coarse, tuple(table), h, objective)


def _combine(mode, choice, units, J, segments, decay) -> PenaltySpec:
    if len(units) == 1 and 0 in units and len(units[0]) == J and mode != "segmentized" or mode == "universal":
        return _spec_for(mode, choice[0], segments, decay)
    if mode == "no_grouping":
        pts = [choice[j] for j in range(J)]
        return PenaltySpec.no_grouping(tuple(p[0] for p in pts), tuple(p[1] for p in pts),
                                       tuple(p[3] for p in pts), decay)
    n = len(segments)
    pts = [choice[s] for s in range(n)] if len(units) == n else [choice[0]] * n
    return PenaltySpec.segmentized(segments, tuple(p[0] for p in pts), tuple(p[1] for p in pts),
                                   tuple(p[2] for p in pts), tuple(p[3] for p in pts), decay)
