"""Synthetic sparse VARs and the selection/risk studies run on them.

Randomness: every trial owns a generator seeded from ``(seed, trial, ...)``
so results do not depend on execution order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, LargeVarError
from .estimators import CoefTensor, ols_refit
from .panel import Panel, build_lag_design
from .solvers import LassoProblem, SolverConfig, canonical_level, solve_lasso

__all__ = [
    "SparseVarTruth",
    "PenaltySchedule",
    "RecoveryReport",
    "DependenceDesign",
    "DependenceRow",
    "generate_sparse_var",
    "simulate_var",
    "recovery_experiment",
    "dependence_risk_experiment",
    "restricted_eigenvalue",
    "estimate_c_prime",
]


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


@dataclass(frozen=True)
class SparseVarTruth:
    """True coefficients with exactly ``p0`` others'-lag and ``q0`` own-lag nonzeros per column."""

    B_true: CoefTensor
    S1: frozenset
    S2: frozenset
    sigma: float
    p0: int
    q0: int

    @property
    def P(self) -> int:
        return self.B_true.P

    @property
    def J(self) -> int:
        return self.B_true.J

    def column_support(self, j: int) -> np.ndarray:
        """Boolean mask over the JP design columns of response ``j``."""
        return self.B_true.matrix[:, j] != 0


def _draw_coefficients(J, P, p0, q0, magnitude, rng):
    lo, hi = magnitude
    B = np.zeros((P, J, J))
    for j in range(J):
        own = rng.choice(P, size=q0, replace=False)
        for p in own:
            B[p, j, j] = rng.uniform(lo, hi) * rng.choice((-1.0, 1.0))
        others = [(p, i) for p in range(P) for i in range(J) if i != j]
        for k in rng.choice(len(others), size=p0, replace=False):
            p, i = others[k]
            B[p, i, j] = rng.uniform(lo, hi) * rng.choice((-1.0, 1.0))
    return B


def simulate_var(B: np.ndarray, T: int, sigma: float, rng: np.random.Generator, burn_in: int | None = None) -> np.ndarray:
    """Simulate ``Y_t = sum_p Y_{t-p} B_p + U_t`` with ``U_t ~ N(0, sigma^2 I)``.

    The first P rows are drawn from N(0, 1) and ``burn_in`` further rows
    (default ``5 P J``) are discarded. Without noise there is no stationary
    law to forget the start towards, and the start is the only excitation,
    so the default burn-in is then zero.
    """
    B = np.asarray(B, dtype=float)
    P, J = B.shape[0], B.shape[1]
    if burn_in is None:
        burn_in = 5 * P * J if sigma > 0 else 0
    burn = burn_in
    total = T + burn + P
    Y = np.zeros((total, J))
    Y[:P] = rng.standard_normal((P, J))
    noise = sigma * rng.standard_normal((total, J))
    for t in range(P, total):
        y = noise[t].copy()
        for p in range(P):
            y += Y[t - p - 1] @ B[p]
        Y[t] = y
    return Y[total - T:]


def generate_sparse_var(J: int, P: int, p0: int, q0: int, magnitude=(0.2, 0.5), sigma: float = 1.0,
                        T: int = 200, seed: int = 0, max_radius: float = 0.95,
                        max_draws: int = 1000) -> tuple[SparseVarTruth, Panel]:
    """Draw a stationary sparse VAR(P) and simulate ``T`` observations from it.

    Coefficient draws are rejected until the companion spectral radius is
    below ``max_radius``.
    """
    if J < 1 or P < 1 or T < 1:
        raise DataError("J, P and T must be positive")
    if not 0 <= p0 <= P * (J - 1):
        raise DataError(f"p0={p0} outside 0..{P * (J - 1)} (P(J-1))")
    if not 0 <= q0 <= P:
        raise DataError(f"q0={q0} outside 0..{P}")
    if sigma < 0:
        raise DataError("sigma must be non-negative")
    lo, hi = magnitude
    if not 0 <= lo <= hi:
        raise DataError("magnitude range must satisfy 0 <= low <= high")
    rng = _rng(seed, 0)
    for _ in range(max_draws):
        B = _draw_coefficients(J, P, p0, q0, (lo, hi), rng)
        truth = CoefTensor(B)
        if truth.spectral_radius() < max_radius:
            break
    else:
        raise DataError(f"no stationary draw in {max_draws} attempts; use smaller coefficient magnitudes")
    S1, S2 = set(), set()
    for p, i, j in np.argwhere(B != 0):
        (S2 if i == j else S1).add((int(p) + 1, int(i), int(j)))
    data = simulate_var(B, T, sigma, _rng(seed, 1))
    return SparseVarTruth(truth, frozenset(S1), frozenset(S2), float(sigma), p0, q0), Panel(data)


@dataclass(frozen=True)
class PenaltySchedule:
    """Penalty level ``scale * T**exponent`` (levels against the 1/N squared-error loss)."""

    scale: float
    exponent: float

    def __post_init__(self):
        if not self.scale > 0:
            raise DataError(f"schedule scale must be positive, got {self.scale}")
        if not math.isfinite(self.exponent):
            raise DataError("schedule exponent must be finite")

    def __call__(self, T: int) -> float:
        return self.scale * float(T) ** self.exponent

    def sqrt_t_rate(self) -> float:
        """Exponent of ``level * sqrt(T)``: negative tends to 0, positive diverges."""
        return self.exponent + 0.5


@dataclass(frozen=True)
class RecoveryReport:
    T: int
    trials: int
    recovery_rate: float
    fp_rate: float
    mean_fp: float
    mean_fn: float
    l2_error: float
    oracle_ratio: float
    refit_ratio: float
    failures: int

    def as_row(self) -> dict:
        return dict(self.__dict__)


def _recovery_trial(J, P, p0, q0, magnitude, sigma, T, a_sched, b_sched, seed, trial, targets,
                    assignment, solver):
    truth, _ = generate_sparse_var(J, P, p0, q0, magnitude, sigma, T=P + 1, seed=_seed_of(seed, trial))
    data = simulate_var(truth.B_true.B, T + P, sigma, _rng(seed, trial, T))
    design = build_lag_design(data, P)
    a, b = a_sched(T), b_sched(T)
    exact = True
    fp = fn = n_false = 0
    err_sel, err_orc, err_ref = [], [], []
    for j in targets:
        true_mask = truth.column_support(j)
        beta_star = truth.B_true.matrix[:, j]
        if assignment == "oracle":
            levels = np.where(true_mask, a, b)
        else:
            init = np.linalg.lstsq(design.X, design.Yresp[:, j], rcond=None)[0]
            levels = a / np.maximum(np.abs(init), 1e-12)
        prob = LassoProblem(design.X, design.Yresp[:, j], canonical_level(levels),
                            gram=design.gram, atb=design.xty[:, j], bsq=float(design.Yresp[:, j] @ design.Yresp[:, j]) / design.n)
        res = solve_lasso(prob, solver)
        sel = res.coef != 0
        exact &= bool(np.array_equal(sel, true_mask))
        fp += int(np.sum(sel & ~true_mask))
        fn += int(np.sum(~sel & true_mask))
        n_false += int(np.sum(~true_mask))
        oracle, _ = ols_refit(design, true_mask, [j])
        refit, _ = ols_refit(design, sel, [j])
        err_sel.append(res.coef[true_mask] - beta_star[true_mask])
        err_orc.append(oracle[true_mask, 0] - beta_star[true_mask])
        err_ref.append(refit[true_mask, 0] - beta_star[true_mask])
    e_sel = float(np.linalg.norm(np.concatenate(err_sel)))
    e_orc = float(np.linalg.norm(np.concatenate(err_orc)))
    e_ref = float(np.linalg.norm(np.concatenate(err_ref)))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = e_sel / e_orc if e_orc > 0 else (1.0 if e_sel == 0 else math.inf)
        rratio = e_ref / e_orc if e_orc > 0 else (1.0 if e_ref == 0 else math.inf)
    return exact, fp, fn, n_false, e_sel, ratio, rratio


def _seed_of(seed, trial) -> int:
    return int(np.random.SeedSequence([int(seed), int(trial)]).generate_state(1)[0])


def recovery_experiment(J: int, P: int, p0: int, q0: int, T_list: Sequence[int], trials: int,
                        a_schedule: PenaltySchedule, b_schedule: PenaltySchedule,
                        magnitude=(0.2, 0.5), sigma: float = 1.0, seed: int = 0,
                        targets: Sequence[int] = (0,), assignment: str = "oracle",
                        mode: str = "no_grouping", solver: SolverConfig = SolverConfig()) -> list[RecoveryReport]:
    """Support recovery and oracle efficiency of the no-grouping estimator as T grows.

    Per trial a fresh truth is drawn (shared by every T) and a panel of each
    length T is simulated. With ``assignment="oracle"`` coefficients in the
    true support get level ``a_schedule(T)`` and all others
    ``b_schedule(T)``; ``"adaptive"`` uses ``a_schedule(T) / |OLS estimate|``.
    The oracle ratio is ``||beta1_hat - beta1*|| / ||beta1_oracle - beta1*||``
    on the true support (penalized estimate against OLS on the true support);
    its median is reported. Failed trials are counted, not raised.
    """
    if mode != "no_grouping":
        raise DataError("recovery experiments are defined for the no_grouping estimator")
    if assignment not in ("oracle", "adaptive"):
        raise DataError(f"unknown level assignment {assignment!r}")
    if trials < 1:
        raise DataError("trials must be positive")
    for t in targets:
        if not 0 <= t < J:
            raise DataError(f"target column {t} outside 0..{J - 1}")
    reports = []
    for T in T_list:
        if T <= J * P:
            raise DataError(f"T={T} must exceed J*P={J * P}")
        rows, failures = [], 0
        for trial in range(trials):
            try:
                rows.append(_recovery_trial(J, P, p0, q0, magnitude, sigma, T, a_schedule, b_schedule,
                                            seed, trial, list(targets), assignment, solver))
            except LargeVarError:
                failures += 1
        if rows:
            ex, fp, fn, nf, e, r, rr = (np.array(c, dtype=float) for c in zip(*rows))
            fp_rate = float(fp.sum() / nf.sum()) if nf.sum() else 0.0
            rep = RecoveryReport(int(T), trials, float(ex.mean()), fp_rate, float(fp.mean()), float(fn.mean()),
                                 float(e.mean()), float(np.median(r)), float(np.median(rr)), failures)
        else:
            rep = RecoveryReport(int(T), trials, math.nan, math.nan, math.nan, math.nan, math.nan,
                                 math.nan, math.nan, failures)
        reports.append(rep)
    return reports


@dataclass(frozen=True)
class DependenceDesign:
    """Regressor process for the dependence study.

    ``MA``: ``x_tp = u_{t-p}`` with ``u`` an equal-weight MA(k) of i.i.d.
    normals, so the products ``eps_t x_tp`` are (k+1)-dependent and the
    dependence measure is ``k + 1``. ``AR``: ``u_t = theta u_{t-1} + noise``,
    dependence measure taken as ``T``.
    """

    kind: str
    k: int = 0
    theta: float = 0.0
    T: int = 500
    P: int = 50

    def __post_init__(self):
        if self.kind not in ("MA", "AR"):
            raise DataError(f"unknown dependence kind {self.kind!r}")
        if self.kind == "MA" and not 0 <= self.k < self.T:
            raise DataError("MA order must satisfy 0 <= k < T")
        if self.kind == "AR" and not abs(self.theta) < 1:
            raise DataError("AR coefficient must be inside the unit interval")
        if self.P < 1 or self.T < 2:
            raise DataError("P and T must be positive")

    @property
    def dependence(self) -> int:
        return self.k + 1 if self.kind == "MA" else self.T

    def regressors(self, rng: np.random.Generator) -> np.ndarray:
        """T x P regressor matrix with every ``diag(x^T x / T)`` entry equal to 1."""
        T, P = self.T, self.P
        n = T + P
        if self.kind == "MA":
            eta = rng.standard_normal(n + self.k)
            u = np.convolve(eta, np.ones(self.k + 1) / math.sqrt(self.k + 1), mode="valid")
        else:
            eta = rng.standard_normal(n + 200)
            u = np.empty_like(eta)
            u[0] = eta[0] / math.sqrt(1 - self.theta ** 2)
            for t in range(1, len(eta)):
                u[t] = self.theta * u[t - 1] + eta[t]
            u = u[-n:]
        x = np.column_stack([u[P - p:P - p + T] for p in range(1, P + 1)])
        return x / np.sqrt(np.mean(x ** 2, axis=0))


@dataclass(frozen=True)
class DependenceRow:
    k: int
    dependence: int
    T: int
    P: int
    s: int
    trials: int
    lam: float
    c_prime: float
    mean_pred_error: float
    mean_l1_error: float
    mean_support: float
    zero_fraction: float
    kappa_mean: float
    bound_fraction: float
    bound_prob: float
    flagged: int

    def as_row(self) -> dict:
        return dict(self.__dict__)


def _dep_sample(design, s, rng):
    x = design.regressors(rng)
    theta = np.zeros(design.P)
    if s:
        idx = rng.choice(design.P, size=s, replace=False)
        theta[idx] = rng.choice((-1.0, 1.0), size=s)
    eps = rng.standard_normal(design.T)
    return x, theta, eps


def estimate_c_prime(design: DependenceDesign, q: float = 0.95, n_sims: int = 200, seed: int = 0) -> float:
    """``q``-quantile over simulations of ``T^-1 sum_t max_p (eps_t x_tp)^2``."""
    vals = np.empty(n_sims)
    for i in range(n_sims):
        x, _, eps = _dep_sample(design, 0, _rng(seed, 7, i))
        b = np.max(np.abs(eps[:, None] * x), axis=1)
        vals[i] = np.mean(b ** 2)
    return float(np.quantile(vals, q))


def dependence_risk_experiment(designs: Sequence[DependenceDesign], s: int, trials: int,
                               delta: float = 0.1, q: float = 0.95, seed: int = 0,
                               kappa_budget: int = 100_000, pilot: int = 200,
                               solver: SolverConfig = SolverConfig()) -> list[DependenceRow]:
    """Lasso risk against the dependence level of the regressors.

    For each design: ``C'`` from ``pilot`` simulations, penalty
    ``lam = sqrt(m (log P)^(1+delta) C' / T)`` with m the dependence measure,
    then per trial the Lasso with the l1 level ``lam`` against the
    ``1/(2T)`` squared loss, its prediction error ``||x (theta_hat -
    theta*)||^2 / T``, l1 error and support size. The risk bound
    ``16 s m (log P)^(1+delta) C' / (T kappa^2)`` uses the heuristic
    restricted eigenvalue of each trial's Gram matrix; trials whose kappa
    estimate vanishes are flagged and left out of ``bound_fraction``.
    """
    if delta <= 0:
        raise DataError("delta must be positive")
    if not 0 < q < 1:
        raise DataError("q must lie in (0, 1)")
    if s < 0:
        raise DataError("s must be non-negative")
    rows = []
    for d_idx, design in enumerate(designs):
        if s > design.P:
            raise DataError(f"s={s} exceeds P={design.P}")
        logp = math.log(design.P) ** (1 + delta)
        cp = estimate_c_prime(design, q, pilot, seed=_seed_of(seed, 10_000 + d_idx))
        m = design.dependence
        lam = math.sqrt(m * logp * cp / design.T)
        pred, l1, supp, zero, kap, held = [], [], [], [], [], []
        flagged = 0
        for trial in range(trials):
            rng = _rng(seed, d_idx, trial, design.T, design.k)
            x, theta, eps = _dep_sample(design, s, rng)
            e = x @ theta + eps
            res = solve_lasso(LassoProblem(x, e, lam), solver)
            diff = res.coef - theta
            pe = float(np.sum((x @ diff) ** 2) / design.T)
            pred.append(pe)
            l1.append(float(np.sum(np.abs(diff))))
            supp.append(int(np.sum(res.coef != 0)))
            zero.append(bool(np.all(res.coef == 0)))
            if s == 0:
                held.append(pe <= 0.0)
                continue
            kappa = restricted_eigenvalue(x.T @ x / design.T, s, kappa_budget, seed=_seed_of(seed, trial))
            kap.append(kappa)
            if kappa < 1e-8:
                flagged += 1
                continue
            held.append(pe <= 16 * s * m * logp * cp / (design.T * kappa ** 2))
        rows.append(DependenceRow(
            design.k, m, design.T, design.P, s, trials, lam, cp,
            float(np.mean(pred)), float(np.mean(l1)), float(np.mean(supp)), float(np.mean(zero)),
            float(np.mean(kap)) if kap else math.nan,
            float(np.mean(held)) if held else math.nan,
            1 - design.P ** (-delta), flagged))
    return rows


def _cone_project(D: np.ndarray, Rmask: np.ndarray) -> np.ndarray:
    l1_in = np.sum(np.abs(D) * Rmask, axis=-1, keepdims=True)
    l1_out = np.sum(np.abs(D) * ~Rmask, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(l1_out > 3 * l1_in, 3 * l1_in / l1_out, 1.0)
    return np.where(Rmask, D, D * f)


def _ratios(G, D, Rmask):
    quad = np.sum((D @ G) * D, axis=1)
    den = np.sqrt(np.sum((D * Rmask) ** 2, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, np.sqrt(np.maximum(quad, 0.0)) / den, np.inf)


def restricted_eigenvalue(gram, s: int, budget: int = 100_000, seed: int = 0, batch: int = 4096) -> float:
    """Heuristic restricted-eigenvalue value over the cone ``||D_Rc||_1 <= 3 ||D_R||_1``, ``|R| = s``.

    Returns the smallest ``sqrt(D^T G D) / ||D_R||_2`` found among eigenvector
    candidates, ``budget`` random cone directions and a local perturbation
    search. Being a minimum over a subset of the cone it is an upper bound on
    the true constant.
    """
    G = np.asarray(gram, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DataError("Gram matrix must be square")
    m = G.shape[0]
    if not 1 <= s <= m:
        raise DataError(f"sparsity s={s} outside 1..{m}")
    G = 0.5 * (G + G.T)
    unit = float(np.mean(np.diag(G)))
    if not unit > 0:
        return 0.0
    Gn = G / unit
    rng = _rng(seed, 99)

    vals, vecs = np.linalg.eigh(Gn)
    cand = vecs.T
    top = np.argsort(-np.abs(cand), axis=1)[:, :s]
    Rc = np.zeros_like(cand, dtype=bool)
    np.put_along_axis(Rc, top, True, axis=1)
    cand = _cone_project(cand, Rc)
    r = _ratios(Gn, cand, Rc)
    best = float(np.min(r))
    i = int(np.argmin(r))
    pool = [(r[i], cand[i], Rc[i])]

    done = 0
    rand_budget = int(budget * 0.8)
    while done < rand_budget:
        nb = min(batch, rand_budget - done)
        Rm = np.zeros((nb, m), dtype=bool)
        idx = np.argsort(rng.random((nb, m)), axis=1)[:, :s]
        np.put_along_axis(Rm, idx, True, axis=1)
        D = rng.standard_normal((nb, m))
        l1_in = np.sum(np.abs(D) * Rm, axis=1, keepdims=True)
        l1_out = np.sum(np.abs(D) * ~Rm, axis=1, keepdims=True)
        u = rng.random((nb, 1))
        u[rng.random(nb) < 0.25] = 0.0
        D = np.where(Rm, D, D * (3 * l1_in * u / l1_out))
        r = _ratios(Gn, D, Rm)
        k = int(np.argmin(r))
        if r[k] < best:
            best = float(r[k])
        pool.append((r[k], D[k], Rm[k]))
        done += nb

    pool.sort(key=lambda t: t[0])
    local = budget - done
    for r0, d0, R0 in pool[:5]:
        cur, cur_r = d0.copy(), r0
        radius = 0.5 * np.linalg.norm(cur)
        steps = max(local // 5, 0)
        used = 0
        while used < steps:
            nb = min(256, steps - used)
            D = _cone_project(cur + radius * rng.standard_normal((nb, m)), np.broadcast_to(R0, (nb, m)))
            r = _ratios(Gn, D, np.broadcast_to(R0, (nb, m)))
            k = int(np.argmin(r))
            if r[k] < cur_r:
                cur, cur_r = D[k], r[k]
            else:
                radius *= 0.7
            used += nb
        best = min(best, float(cur_r))
    return best * math.sqrt(unit)
