"""Command-line front end: ``largevar {fit,evaluate,simulate} --config FILE``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from typing import Sequence

import numpy as np

from .config import RunConfig, format_config, load_config
from .errors import ConfigError, DataError, SolverError
from .estimators import PenaltySpec, fit_var
from .forecast import REPORT_COLUMNS, HyperGrid, RollingConfig, benchmark_rw_drift, grid_search, rolling_evaluate
from .panel import Panel, apply_transforms, build_lag_design, read_panel_csv, standardize
from .simulation import (DependenceDesign, PenaltySchedule, dependence_risk_experiment,
                         recovery_experiment)
from .solvers import SolverConfig

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_SOLVER = 0, 2, 3, 4


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.10g" % v
    return str(v)


def write_csv(path: str, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            vals = [row.get(h, "") for h in header] if isinstance(row, dict) else row
            w.writerow([_fmt(v) for v in vals])


def _load_panel(cfg: RunConfig, base_dir: str) -> Panel:
    path = cfg.resolve_input(base_dir)
    try:
        raw, names = read_panel_csv(path, cfg.variables or None)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    codes = cfg.transforms
    if len(codes) == 1:
        codes = codes * len(names)
    if len(codes) != len(names):
        raise ConfigError(f"{len(codes)} transform codes for {len(names)} variables")
    return apply_transforms(raw, codes, names)


def _segments(cfg: RunConfig, panel: Panel):
    if cfg.mode != "segmentized":
        return None
    return tuple(tuple(panel.index_of(n) for n in seg) for seg in cfg.segments)


def _spec(cfg: RunConfig, panel: Panel) -> PenaltySpec:
    lam, gamma, eta, alpha = cfg.lam[0], cfg.gamma[0], cfg.eta[0], cfg.alpha[0]
    if cfg.mode == "universal":
        return PenaltySpec.universal(lam, gamma, alpha, cfg.decay)
    if cfg.mode == "no_grouping":
        return PenaltySpec.no_grouping(lam, gamma, alpha, cfg.decay)
    return PenaltySpec.segmentized(_segments(cfg, panel), lam, gamma, eta, alpha, cfg.decay)


def _solver(cfg: RunConfig) -> SolverConfig:
    return SolverConfig(max_sweeps=cfg.max_sweeps, tolerance=cfg.tolerance)


def cmd_fit(cfg: RunConfig, out: str, base_dir: str = ".") -> int:
    """Fit at the first value of every hyperparameter list and the first P."""
    panel = _load_panel(cfg, base_dir)
    data = standardize(panel)[0] if cfg.standardize else panel
    P = cfg.P[0]
    spec = _spec(cfg, panel)
    fit = fit_var(build_lag_design(data, P), spec, _solver(cfg))
    names = panel.names
    os.makedirs(out, exist_ok=True)
    header = ("lag", "regressor", "response", "coefficient")
    for which in ("selected", "refit"):
        B = fit.coefficients(which).B
        rows = [(p + 1, names[i], names[j], B[p, i, j])
                for p in range(P) for i in range(panel.J) for j in range(panel.J)]
        write_csv(os.path.join(out, f"coefficients_{which}.csv"), header, rows)
    support = sorted([("S1",) + k for k in fit.S1] + [("S2",) + k for k in fit.S2],
                     key=lambda r: (r[0], r[1], r[2], r[3]))
    write_csv(os.path.join(out, "support.csv"), ("set", "lag", "regressor", "response"),
              [(s, p, names[i], names[j]) for s, p, i, j in support])

    targets = [panel.index_of(t) for t in cfg.targets] if cfg.targets else list(range(panel.J))
    counts = fit.support_counts()
    lines = [f"mode: {spec.mode}", f"P: {P}",
             f"coefficients in {'standardized' if cfg.standardize else 'input'} units", ""]
    for j in targets:
        s1, s2 = counts[j]
        if s1 + s2 == 0:
            lines.append(f"{names[j]}: 0 selected")
        else:
            lines.append(f"{names[j]}: {s1 + s2} selected (others' lags |S1| = {s1}, own lags |S2| = {s2})")
    bad = sum(1 for c in fit.converged.values() if not c)
    if bad:
        msg = f"warning: {bad} of {len(fit.converged)} subproblems did not converge"
        lines.append(msg)
        print(msg, file=sys.stderr)
    if fit.rank_deficient:
        lines.append("rank-deficient refit for: " + ", ".join(names[j] for j in fit.rank_deficient))
    with open(os.path.join(out, "summary.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return EXIT_OK


def _rolling(cfg: RunConfig, panel: Panel) -> RollingConfig:
    T0 = cfg.T0 if cfg.T0 >= 0 else cfg.window_len - 1
    T1 = cfg.T1 if cfg.T1 >= 0 else panel.T - 1
    return RollingConfig(T0, T1, cfg.window_len, cfg.horizons, cfg.refit_every)


def _benchmark_forecaster(window, t, hs):
    return {h: benchmark_rw_drift(window.data, h) for h in hs}


def cmd_evaluate(cfg: RunConfig, out: str, base_dir: str = ".") -> int:
    """Grid-search per (P, h) and write one report row per (variable, h, P)."""
    panel = _load_panel(cfg, base_dir)
    roll = _rolling(cfg, panel)
    solver = _solver(cfg)
    segments = _segments(cfg, panel)
    report_rows, grid_rows = [], []
    for P in cfg.P:
        if cfg.forecaster == "benchmark":
            rep = rolling_evaluate(panel, None, roll, P, forecaster=_benchmark_forecaster)
            for r in rep.rows():
                report_rows.append(r)
            continue
        grid = HyperGrid(cfg.lam, cfg.gamma, cfg.eta, cfg.alpha, cfg.refine_factor, cfg.refine_rounds)
        for h in cfg.horizons:
            res = grid_search(panel, cfg.mode, grid, roll, P, cfg.objective, h, solver, segments,
                              cfg.decay, cfg.which, n_jobs=cfg.threads)
            rep = rolling_evaluate(panel, res.best, roll, P, solver, which=cfg.which)
            report_rows.extend(r for r in rep.rows() if r["h"] == h)
            for row in res.table:
                grid_rows.append({"mode": cfg.mode, **row})
    os.makedirs(out, exist_ok=True)
    write_csv(os.path.join(out, "report.csv"), REPORT_COLUMNS, report_rows)
    if grid_rows:
        header = list(dict.fromkeys(k for row in grid_rows for k in row))
        write_csv(os.path.join(out, "grid.csv"), header, grid_rows)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out: str, base_dir: str = ".") -> int:
    os.makedirs(out, exist_ok=True)
    solver = _solver(cfg)
    if cfg.experiment == "recovery":
        try:
            a = PenaltySchedule(cfg.a_scale, cfg.a_exponent)
            b = PenaltySchedule(cfg.b_scale, cfg.b_exponent)
        except DataError as exc:
            raise ConfigError(str(exc)) from None
        reps = recovery_experiment(cfg.J, cfg.P[0], cfg.p0, cfg.q0, cfg.T_list, cfg.trials, a, b,
                                   (cfg.magnitude_low, cfg.magnitude_high), cfg.sigma, cfg.seed,
                                   assignment=cfg.assignment, solver=solver)
        rows = [r.as_row() for r in reps]
        write_csv(os.path.join(out, "recovery.csv"), list(rows[0]), rows)
    else:
        designs = [DependenceDesign("MA", k, T=cfg.dep_T, P=cfg.dep_P) for k in cfg.k_list]
        reps = dependence_risk_experiment(designs, cfg.s, cfg.trials, cfg.delta, cfg.q, cfg.seed,
                                          cfg.kappa_budget, cfg.pilot, solver)
        rows = [r.as_row() for r in reps]
        write_csv(os.path.join(out, "dependence.csv"), list(rows[0]), rows)
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "evaluate": cmd_evaluate, "simulate": cmd_simulate}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="largevar", description="Penalized large VAR estimation and evaluation.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="key = value configuration file")
    ap.add_argument("--out", help="output directory (overrides the config)")
    ap.add_argument("--seed", type=int, help="random seed (overrides the config)")
    ap.add_argument("--threads", type=int, help="parallel workers (overrides the config)")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(out=args.out, seed=args.seed, threads=args.threads)
        base_dir = os.path.dirname(os.path.abspath(args.config))
        code = COMMANDS[args.command](cfg, cfg.out, base_dir)
        os.makedirs(cfg.out, exist_ok=True)
        with open(os.path.join(cfg.out, "config_used.txt"), "w") as fh:
            fh.write(format_config(cfg))
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
