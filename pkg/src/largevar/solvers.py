"""Lasso and mixed group-Lasso solvers by (block) coordinate descent.

Every problem is put in one canonical form before solving::

    loss_scale / (2 N) * ||b - A beta||^2 + sum_j level_j |beta_j| + sum_g level_g ||beta_g||_2

where ``N`` is the number of scalar observations (rows times response
columns when ``b`` is a block). Objectives written with other normalizations
are mapped onto this one by :func:`canonical_level`.

With a response block ``b`` (n x k) the coefficient is an m x k matrix and
coefficient indices are flat, row-major: entry ``(r, c)`` is ``r * k + c``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from ._kernels import block_cd
from .errors import DataError

__all__ = [
    "LassoProblem",
    "GroupPartition",
    "SolverConfig",
    "SolverResult",
    "canonical_level",
    "soft_threshold",
    "solve_lasso",
    "solve_group_lasso",
    "objective",
    "kkt_violation",
    "lambda_max",
]

# multiplier taking a level written against each loss form to the canonical level
_LOSS_FORMS = {
    "half_mean": 1.0,     # 1/(2N) ||r||^2 + level |b|
    "mean": 0.5,          # 1/N ||r||^2 + level |b|
    "sum_times_n": 0.5,   # ||r||^2 + N * level |b|
}


def canonical_level(level, form: str = "mean"):
    """Convert penalty levels written against ``form`` into canonical levels."""
    try:
        factor = _LOSS_FORMS[form]
    except KeyError:
        raise ValueError(f"unknown loss form {form!r}; expected one of {sorted(_LOSS_FORMS)}") from None
    return np.asarray(level, dtype=float) * factor


def soft_threshold(z: float, tau: float) -> float:
    if tau < 0:
        raise ValueError("threshold must be non-negative")
    if z > tau:
        return z - tau
    if z < -tau:
        return z + tau
    return 0.0


@dataclass(frozen=True)
class LassoProblem:
    """Design ``A`` (n x m), response ``b`` (n or n x k) and per-coefficient l1 levels.

    ``levels`` may be a scalar, an m-vector (shared by all response columns)
    or an m x k array. Levels of coefficients that belong to a group in a
    :class:`GroupPartition` are ignored by :func:`solve_group_lasso`.
    """

    A: np.ndarray
    b: np.ndarray
    levels: np.ndarray | float = 0.0
    loss_scale: float = 1.0
    gram: np.ndarray | None = field(default=None, repr=False)
    atb: np.ndarray | None = field(default=None, repr=False)
    bsq: float | None = field(default=None, repr=False)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise DataError(f"design must be a non-empty matrix, got shape {A.shape}")
        if b.ndim not in (1, 2) or b.shape[0] != A.shape[0]:
            raise DataError(f"response with shape {b.shape} does not match design {A.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise DataError("design and response must be finite")
        if not self.loss_scale > 0:
            raise DataError("loss_scale must be positive")
        k = 1 if b.ndim == 1 else b.shape[1]
        lv = np.asarray(self.levels, dtype=float)
        if lv.ndim == 0:
            lv = np.full((A.shape[1], k), float(lv))
        elif lv.ndim == 1:
            if lv.shape[0] != A.shape[1]:
                raise DataError(f"{lv.shape[0]} levels for {A.shape[1]} columns")
            lv = np.repeat(lv[:, None], k, axis=1)
        elif lv.shape != (A.shape[1], k):
            raise DataError(f"levels shape {lv.shape} does not match ({A.shape[1]}, {k})")
        if np.any(~(lv >= 0)):
            raise DataError("penalty levels must be non-negative")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "levels", lv)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.A.shape[1]

    @property
    def k(self) -> int:
        return 1 if self.b.ndim == 1 else self.b.shape[1]

    @property
    def n_obs(self) -> int:
        return self.n * self.k

    @property
    def B_block(self) -> np.ndarray:
        return self.b.reshape(self.n, self.k)

    @cached_property
    def G(self) -> np.ndarray:
        # Smooth part in Gram form: 0.5 <B, G B> - <C, B> + const, loss_scale folded in.
        if self.gram is not None:
            return np.ascontiguousarray(self.gram, dtype=float) * (self.loss_scale * self.n / self.n_obs)
        return self.A.T @ self.A * (self.loss_scale / self.n_obs)

    @cached_property
    def C(self) -> np.ndarray:
        if self.atb is not None:
            return np.asarray(self.atb, dtype=float).reshape(self.m, self.k) * (self.loss_scale * self.n / self.n_obs)
        return self.A.T @ self.B_block * (self.loss_scale / self.n_obs)

    @cached_property
    def const(self) -> float:
        bsq = self.bsq if self.bsq is not None else float(np.sum(self.b ** 2)) / self.n
        return 0.5 * bsq * self.loss_scale * self.n / self.n_obs

    def shape_coef(self, coef) -> np.ndarray:
        coef = np.asarray(coef, dtype=float)
        return coef.reshape(self.m, self.k)

    def unshape_coef(self, B: np.ndarray) -> np.ndarray:
        return B[:, 0].copy() if self.b.ndim == 1 else B.copy()


@dataclass(frozen=True)
class GroupPartition:
    """Disjoint l2 groups plus l1 singletons over flat coefficient indices.

    Every coefficient index must appear in exactly one group or exactly once
    among the singletons.
    """

    groups: tuple[np.ndarray, ...]
    group_levels: np.ndarray
    singletons: np.ndarray
    singleton_levels: np.ndarray

    def __post_init__(self):
        groups = tuple(np.asarray(g, dtype=np.int64).ravel() for g in self.groups)
        for i, g in enumerate(groups):
            if g.size == 0:
                raise DataError(f"group {i} is empty")
        gl = np.asarray(self.group_levels, dtype=float).ravel()
        if gl.size == 1 and len(groups) != 1:
            gl = np.full(len(groups), gl[0])
        sing = np.asarray(self.singletons, dtype=np.int64).ravel()
        sl = np.asarray(self.singleton_levels, dtype=float).ravel()
        if sl.size == 1 and sing.size != 1:
            sl = np.full(sing.size, sl[0])
        if gl.size != len(groups) or sl.size != sing.size:
            raise DataError("one level is required per group and per singleton")
        if np.any(~(gl >= 0)) or np.any(~(sl >= 0)):
            raise DataError("penalty levels must be non-negative")
        allidx = np.concatenate(groups + (sing,)) if groups else sing
        if np.unique(allidx).size != allidx.size:
            raise DataError("groups and singletons must be pairwise disjoint")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "group_levels", gl)
        object.__setattr__(self, "singletons", sing)
        object.__setattr__(self, "singleton_levels", sl)

    @classmethod
    def build(cls, size: int, groups: Sequence[Sequence[int]], group_levels, singleton_levels=0.0) -> "GroupPartition":
        """Groups as given; every remaining index becomes a singleton."""
        used = np.zeros(size, dtype=bool)
        for g in groups:
            used[np.asarray(g, dtype=int)] = True
        sing = np.flatnonzero(~used)
        sl = np.asarray(singleton_levels, dtype=float)
        if sl.ndim == 1 and sl.size == size:
            sl = sl[sing]
        return cls(tuple(np.asarray(g) for g in groups), group_levels, sing, sl)

    def covers(self, size: int) -> bool:
        allidx = np.concatenate(self.groups + (self.singletons,)) if self.groups else self.singletons
        return allidx.size == size and np.array_equal(np.sort(allidx), np.arange(size))


@dataclass(frozen=True)
class SolverConfig:
    max_sweeps: int = 10_000
    tolerance: float = 1e-7
    warm_start: np.ndarray | None = None
    # a small coefficient change only counts as convergence once the KKT violation is below this
    kkt_tolerance: float = 1e-6

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be positive")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not self.kkt_tolerance > 0:
            raise ValueError("kkt_tolerance must be positive")

    def with_warm_start(self, coef) -> "SolverConfig":
        return SolverConfig(self.max_sweeps, self.tolerance, None if coef is None else np.asarray(coef, dtype=float),
                            self.kkt_tolerance)


@dataclass(frozen=True)
class SolverResult:
    coef: np.ndarray
    trace: np.ndarray
    converged: bool
    sweeps: int


def _solve(prob: LassoProblem, part: GroupPartition, cfg: SolverConfig) -> SolverResult:
    m, k = prob.m, prob.k
    size = m * k
    if not part.covers(size):
        raise DataError(f"partition does not cover all {size} coefficients exactly once")
    G = np.ascontiguousarray(prob.G)
    C = np.ascontiguousarray(prob.C)
    if cfg.warm_start is not None:
        B = np.array(prob.shape_coef(cfg.warm_start), dtype=float)
    else:
        B = np.zeros((m, k))
    R = C - G @ B

    s_row, s_col = np.divmod(part.singletons, k)
    s_lvl = np.asarray(part.singleton_levels, dtype=float)

    sizes = np.array([g.size for g in part.groups], dtype=np.int64)
    g_ptr = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    flat = np.concatenate(part.groups) if part.groups else np.zeros(0, dtype=np.int64)
    g_row, g_col = np.divmod(flat, k)
    g_scalar = np.zeros(len(part.groups), dtype=np.bool_)
    g_eval = np.zeros(flat.size)
    evecs = []
    g_eptr = np.zeros(len(part.groups) + 1, dtype=np.int64)
    for gi, g in enumerate(part.groups):
        rows, cols = g_row[g_ptr[gi]:g_ptr[gi + 1]], g_col[g_ptr[gi]:g_ptr[gi + 1]]
        H = G[np.ix_(rows, rows)] * (cols[:, None] == cols[None, :])
        off = H - np.diag(np.diag(H))
        if not np.any(off) and np.all(np.diag(H) == H[0, 0]):
            g_scalar[gi] = True
            vals, vecs = np.full(g.size, H[0, 0]), np.eye(g.size)
        else:
            vals, vecs = np.linalg.eigh(H)
            vals = np.maximum(vals, 0.0)
        g_eval[g_ptr[gi]:g_ptr[gi + 1]] = vals
        evecs.append(vecs.ravel())
        g_eptr[gi + 1] = g_eptr[gi] + g.size * g.size
    g_evec = np.concatenate(evecs) if evecs else np.zeros(0)

    args = (s_row.astype(np.int64), s_col.astype(np.int64), s_lvl,
            g_ptr, g_row.astype(np.int64), g_col.astype(np.int64),
            np.asarray(part.group_levels, dtype=float), g_scalar, g_eval, g_evec, g_eptr, float(prob.const))
    traces = []
    sweeps, tol, converged = 0, float(cfg.tolerance), False
    while sweeps < cfg.max_sweeps:
        budget = int(cfg.max_sweeps - sweeps)
        trace = np.empty(budget + 1)
        done, converged, n_trace = block_cd(G, C, B, R, *args, budget, tol, trace)
        traces.append(trace[:n_trace] if not traces else trace[1:n_trace])
        sweeps += int(done)
        # a stalled but suboptimal iterate: keep going with a finer change threshold
        if not converged or kkt_violation(prob, prob.unshape_coef(B), part) <= cfg.kkt_tolerance:
            break
        converged = False
        tol *= 0.1
        R = C - G @ B
    return SolverResult(prob.unshape_coef(B), np.concatenate(traces).copy(), bool(converged), int(sweeps))


def solve_lasso(prob: LassoProblem, cfg: SolverConfig = SolverConfig()) -> SolverResult:
    """Cyclic coordinate descent for the l1-penalized problem.

    Non-convergence is reported through ``SolverResult.converged``; the last
    iterate is returned.
    """
    part = GroupPartition((), np.zeros(0), np.arange(prob.m * prob.k), prob.levels.ravel())
    return _solve(prob, part, cfg)


def solve_group_lasso(prob: LassoProblem, groups: GroupPartition,
                      cfg: SolverConfig = SolverConfig()) -> SolverResult:
    """Block coordinate descent alternating a sweep over groups and a sweep over singletons.

    Group blocks are minimized exactly: a zero block when its partial gradient
    norm is within the level, otherwise the solution of the block secular
    equation. The group levels and singleton levels in ``groups`` are used;
    ``prob.levels`` is ignored.
    """
    return _solve(prob, groups, cfg)


def _gradient(prob: LassoProblem, coef) -> np.ndarray:
    B = prob.shape_coef(coef)
    return prob.G @ B - prob.C


def objective(prob: LassoProblem, coef, groups: GroupPartition | None = None) -> float:
    """Canonical penalized objective at ``coef`` (computed from the residual directly)."""
    B = prob.shape_coef(coef)
    resid = prob.B_block - prob.A @ B
    f = 0.5 * prob.loss_scale * float(np.sum(resid ** 2)) / prob.n_obs
    flat = B.ravel()
    if groups is None:
        return f + float(np.sum(prob.levels.ravel() * np.abs(flat)))
    f += float(np.sum(groups.singleton_levels * np.abs(flat[groups.singletons])))
    for g, lv in zip(groups.groups, groups.group_levels):
        f += lv * float(np.linalg.norm(flat[g]))
    return f


def kkt_violation(prob: LassoProblem, coef, groups: GroupPartition | None = None) -> float:
    """Largest violation of the (block) subgradient optimality conditions.

    Zero scalar: ``|grad| - level``; nonzero scalar: ``|grad + level*sign|``;
    zero group: ``||grad_g|| - level``; nonzero group:
    ``||grad_g + level * beta_g / ||beta_g|| ||``.
    """
    grad = _gradient(prob, coef).ravel()
    flat = prob.shape_coef(coef).ravel()
    if groups is None:
        sing, slv, grp, glv = np.arange(flat.size), prob.levels.ravel(), (), ()
    else:
        sing, slv, grp, glv = groups.singletons, groups.singleton_levels, groups.groups, groups.group_levels
    worst = 0.0
    if len(sing):
        g, b = grad[sing], flat[sing]
        nz = b != 0
        if np.any(nz):
            worst = max(worst, float(np.max(np.abs(g[nz] + slv[nz] * np.sign(b[nz])))))
        if np.any(~nz):
            worst = max(worst, float(np.max(np.abs(g[~nz]) - slv[~nz])))
    for idx, lv in zip(grp, glv):
        g, b = grad[idx], flat[idx]
        nb = np.linalg.norm(b)
        if nb > 0:
            worst = max(worst, float(np.linalg.norm(g + lv * b / nb)))
        else:
            worst = max(worst, float(np.linalg.norm(g) - lv))
    return worst


def lambda_max(prob: LassoProblem) -> float:
    """Smallest uniform canonical l1 level at which the zero vector is optimal."""
    return float(np.max(np.abs(prob.C)))
