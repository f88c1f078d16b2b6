"""Penalized VAR estimators: universal, no and segmentized grouping.

All three are fitted the same way. Rescale the design columns by the inverse
of (lag decay x variable scale), solve a uniform-level (group) Lasso on the
rescaled design, then map the solution back by the same diagonal scaling.
The selected support is refitted by ordinary least squares.

Penalty levels in :class:`PenaltySpec` are written against the mean squared
error of the fitted response block (``1/N ||Y - XB||^2``), so a level of
``lam`` here means ``lam / 2`` in the canonical solver form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError
from .panel import LagDesign, StandardizationWeights
from .solvers import (
    GroupPartition,
    LassoProblem,
    SolverConfig,
    canonical_level,
    solve_group_lasso,
    solve_lasso,
)

__all__ = [
    "MODES",
    "DECAY_KINDS",
    "PenaltySpec",
    "LagDecayMatrix",
    "CoefTensor",
    "FitResult",
    "build_transform",
    "fit_no_grouping",
    "fit_universal",
    "fit_segmentized",
    "fit_var",
    "ols_refit",
    "support_mask",
]

MODES = ("universal", "no_grouping", "segmentized")
DECAY_KINDS = ("power", "log", "exp")


def _as_param(x):
    a = np.asarray(x, dtype=float)
    if a.ndim > 1:
        raise DataError("penalty parameters must be scalars or 1-d arrays")
    if np.any(~(a >= 0)):
        raise DataError("penalty parameters must be non-negative")
    return float(a) if a.ndim == 0 else tuple(float(v) for v in a)


@dataclass(frozen=True)
class PenaltySpec:
    """Grouping mode and its hyperparameters.

    ``lam``/``gamma`` are scalars in universal mode. In no_grouping mode they
    (and ``alpha``) may be per-response-column sequences; in segmentized mode
    ``lam``, ``gamma``, ``eta`` and ``alpha`` may be per-segment sequences.
    ``eta`` and ``segments`` belong to segmentized mode only.
    """

    mode: str = "no_grouping"
    lam: float | tuple[float, ...] = 0.0
    gamma: float | tuple[float, ...] = 0.0
    eta: float | tuple[float, ...] | None = None
    alpha: float | tuple[float, ...] = 1.0
    segments: tuple[tuple[int, ...], ...] = ()
    decay: str = "power"

    def __post_init__(self):
        if self.mode not in MODES:
            raise DataError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.decay not in DECAY_KINDS:
            raise DataError(f"unknown decay {self.decay!r}; expected one of {DECAY_KINDS}")
        for name in ("lam", "gamma", "alpha"):
            object.__setattr__(self, name, _as_param(getattr(self, name)))
        if self.mode == "segmentized":
            if self.eta is None:
                raise DataError("segmentized mode requires eta")
            object.__setattr__(self, "eta", _as_param(self.eta))
            segs = tuple(tuple(int(v) for v in s) for s in self.segments)
            if not segs or any(len(s) == 0 for s in segs):
                raise DataError("segmentized mode requires non-empty segments")
            flat = [v for s in segs for v in s]
            if len(set(flat)) != len(flat) or sorted(flat) != list(range(len(flat))):
                raise DataError("segments must partition the variables 0..J-1")
            object.__setattr__(self, "segments", segs)
            for name in ("lam", "gamma", "eta", "alpha"):
                v = getattr(self, name)
                if isinstance(v, tuple) and len(v) != len(segs):
                    raise DataError(f"{name} has {len(v)} entries for {len(segs)} segments")
        else:
            if self.eta is not None:
                raise DataError(f"eta is only used in segmentized mode, not {self.mode}")
            if self.segments:
                raise DataError(f"segments are only used in segmentized mode, not {self.mode}")
            if self.mode == "universal":
                for name in ("lam", "gamma", "alpha"):
                    if isinstance(getattr(self, name), tuple):
                        raise DataError(f"universal mode takes a scalar {name}")

    @classmethod
    def universal(cls, lam, gamma, alpha=1.0, decay="power") -> "PenaltySpec":
        return cls("universal", lam, gamma, None, alpha, (), decay)

    @classmethod
    def no_grouping(cls, lam, gamma, alpha=1.0, decay="power") -> "PenaltySpec":
        return cls("no_grouping", lam, gamma, None, alpha, (), decay)

    @classmethod
    def segmentized(cls, segments, lam, gamma, eta, alpha=1.0, decay="power") -> "PenaltySpec":
        return cls("segmentized", lam, gamma, eta, alpha, tuple(tuple(s) for s in segments), decay)

    @staticmethod
    def _pick(v, i):
        return v[i] if isinstance(v, tuple) else v

    def column(self, j: int) -> tuple[float, float, float]:
        """``(lam_j, gamma_j, alpha_j)`` for response column ``j`` (no_grouping)."""
        return self._pick(self.lam, j), self._pick(self.gamma, j), self._pick(self.alpha, j)

    def segment(self, s: int) -> tuple[float, float, float, float]:
        """``(lam, gamma, eta, alpha)`` for segment ``s``."""
        return (self._pick(self.lam, s), self._pick(self.gamma, s),
                self._pick(self.eta, s), self._pick(self.alpha, s))

    def segment_of(self, j: int) -> int:
        for s, seg in enumerate(self.segments):
            if j in seg:
                return s
        raise IndexError(j)

    def params_for(self, j: int) -> dict:
        """Hyperparameters that govern response column ``j``."""
        if self.mode == "universal":
            return {"lam": self.lam, "gamma": self.gamma, "eta": float("nan"), "alpha": self.alpha}
        if self.mode == "no_grouping":
            lam, gamma, alpha = self.column(j)
            return {"lam": lam, "gamma": gamma, "eta": float("nan"), "alpha": alpha}
        lam, gamma, eta, alpha = self.segment(self.segment_of(j))
        return {"lam": lam, "gamma": gamma, "eta": eta, "alpha": alpha}

    def check_dims(self, J: int) -> None:
        if self.mode == "no_grouping":
            for name in ("lam", "gamma", "alpha"):
                v = getattr(self, name)
                if isinstance(v, tuple) and len(v) != J:
                    raise DataError(f"{name} has {len(v)} entries for {J} variables")
        elif self.mode == "segmentized":
            n = sum(len(s) for s in self.segments)
            if n != J:
                raise DataError(f"segments cover {n} variables, panel has {J}")


@dataclass(frozen=True)
class LagDecayMatrix:
    """Diagonal lag-decay penalty multipliers ``f(p)``, each repeated J times.

    ``power``: ``p**alpha``; ``log``: ``(1 + log p)**alpha``; ``exp``:
    ``exp(alpha * (p - 1))``. All equal 1 at lag 1.
    """

    alpha: float
    P: int
    J: int
    kind: str = "power"

    def __post_init__(self):
        if self.alpha < 0:
            raise DataError("decay exponent must be non-negative")
        if self.P < 1 or self.J < 1:
            raise DataError("decay dimensions must be positive")
        if self.kind not in DECAY_KINDS:
            raise DataError(f"unknown decay {self.kind!r}")

    @property
    def lag_weights(self) -> np.ndarray:
        p = np.arange(1, self.P + 1, dtype=float)
        if self.kind == "power":
            return p ** self.alpha
        if self.kind == "log":
            return (1.0 + np.log(p)) ** self.alpha
        return np.exp(self.alpha * (p - 1.0))

    def diagonal(self) -> np.ndarray:
        return np.repeat(self.lag_weights, self.J)


def build_transform(weights, decay: LagDecayMatrix, own_boost=None) -> np.ndarray:
    """Diagonal of the inverse column scaling; ``X * scale`` is the rescaled design.

    ``weights`` is a :class:`StandardizationWeights`, a J-vector of scales or
    ``None`` (all ones). ``own_boost`` multiplies selected variables' scales,
    e.g. ``mu_j`` on the target's own column.
    """
    J, P = decay.J, decay.P
    if weights is None:
        w = np.ones(J)
    elif isinstance(weights, StandardizationWeights):
        w = np.asarray(weights.w, dtype=float)
    else:
        w = np.asarray(weights, dtype=float)
    if w.shape != (J,):
        raise DataError(f"{w.size} weights for {J} variables")
    if own_boost is not None:
        boost = np.asarray(own_boost, dtype=float)
        if boost.shape != (J,):
            raise DataError(f"{boost.size} boost factors for {J} variables")
        w = w * boost
    if np.any(~(w > 0)):
        raise DataError("scales must be positive")
    return 1.0 / (decay.diagonal() * np.tile(w, P))


@dataclass(frozen=True)
class CoefTensor:
    """VAR coefficients ``B[p-1, i, j]``: effect of variable i at lag p on variable j."""

    B: np.ndarray

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        if B.ndim != 3 or B.shape[1] != B.shape[2]:
            raise DataError(f"coefficient tensor must be P x J x J, got {B.shape}")
        if not np.all(np.isfinite(B)):
            raise DataError("coefficients must be finite")
        B.setflags(write=False)
        object.__setattr__(self, "B", B)

    @classmethod
    def zeros(cls, P: int, J: int) -> "CoefTensor":
        return cls(np.zeros((P, J, J)))

    @classmethod
    def from_matrix(cls, M, P: int) -> "CoefTensor":
        M = np.asarray(M, dtype=float)
        J = M.shape[1]
        return cls(M.reshape(P, J, J))

    @property
    def P(self) -> int:
        return self.B.shape[0]

    @property
    def J(self) -> int:
        return self.B.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        """Stacked ``(B_1; ...; B_P)``, JP x J, rows in design-column order."""
        return self.B.reshape(self.P * self.J, self.J)

    @property
    def own(self) -> np.ndarray:
        """P x J own-lag (diagonal) coefficients."""
        idx = np.arange(self.J)
        return self.B[:, idx, idx]

    @property
    def off_diagonal(self) -> np.ndarray:
        mask = ~np.eye(self.J, dtype=bool)
        return self.B * mask

    def companion(self) -> np.ndarray:
        """Companion matrix of ``Y_t = sum_p B_p^T Y_{t-p}``."""
        P, J = self.P, self.J
        top = np.hstack([self.B[p].T for p in range(P)])
        if P == 1:
            return top
        return np.vstack([top, np.eye(J * (P - 1), J * P)])

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.companion()))))


@dataclass(frozen=True)
class FitResult:
    """Penalized selection plus least-squares refit on the selected support.

    ``S1`` holds others'-lag indices and ``S2`` own-lag indices, both as
    ``(p, i, j)`` with lag p (1-based), regressor i and response j. Only the
    response columns in ``columns`` were estimated.
    """

    B_selected: CoefTensor
    B_refit: CoefTensor
    S1: frozenset
    S2: frozenset
    columns: tuple[int, ...]
    spec: PenaltySpec
    traces: Mapping = field(default_factory=dict, repr=False)
    converged: Mapping = field(default_factory=dict)
    rank_deficient: tuple[int, ...] = ()

    @property
    def all_converged(self) -> bool:
        return all(self.converged.values())

    @property
    def n_selected(self) -> int:
        return len(self.S1) + len(self.S2)

    def coefficients(self, which: str = "refit") -> CoefTensor:
        if which == "refit":
            return self.B_refit
        if which == "selected":
            return self.B_selected
        raise ValueError(f"unknown coefficient set {which!r}")

    def support_counts(self) -> dict[int, tuple[int, int]]:
        """Response column -> (|S1|, |S2|) restricted to that column."""
        out = {j: [0, 0] for j in self.columns}
        for (_, _, j) in self.S1:
            out[j][0] += 1
        for (_, _, j) in self.S2:
            out[j][1] += 1
        return {j: (a, b) for j, (a, b) in out.items()}


def support_mask(B: np.ndarray) -> np.ndarray:
    return np.asarray(B) != 0


def _support_sets(B: np.ndarray, columns: Sequence[int]) -> tuple[frozenset, frozenset]:
    S1, S2 = set(), set()
    for p, i, j in np.argwhere(B != 0):
        if j not in columns:
            continue
        (S2 if i == j else S1).add((int(p) + 1, int(i), int(j)))
    return frozenset(S1), frozenset(S2)


def ols_refit(design: LagDesign, support, columns: Sequence[int]) -> tuple[np.ndarray, tuple[int, ...]]:
    """Least squares on exactly the supported design columns.

    ``support`` is a JP x len(columns) boolean mask. Returns the JP x
    len(columns) coefficients (unsupported entries exactly 0) and the response
    columns whose supported submatrix was rank deficient; those are solved by
    minimum-norm least squares.
    """
    support = np.asarray(support, dtype=bool)
    columns = list(columns)
    if support.ndim == 1:
        support = support[:, None]
    if support.shape != (design.X.shape[1], len(columns)):
        raise DataError(f"support mask shape {support.shape} does not match design")
    out = np.zeros(support.shape)
    deficient = []
    for c, j in enumerate(columns):
        idx = np.flatnonzero(support[:, c])
        if idx.size == 0:
            continue
        if idx.size > design.n:
            raise DataError(
                f"refit of column {j} is underdetermined: {idx.size} selected coefficients, {design.n} observations"
            )
        Xs = design.X[:, idx]
        coef, _, rank, _ = np.linalg.lstsq(Xs, design.Yresp[:, j], rcond=None)
        if rank < idx.size:
            deficient.append(j)
        out[idx, c] = coef
    return out, tuple(deficient)


def _scaled_problem(design: LagDesign, scale: np.ndarray, cols: Sequence[int], levels=0.0) -> LassoProblem:
    cols = list(cols)
    Xs = design.X * scale
    G = design.gram * np.outer(scale, scale)
    C = design.xty[:, cols] * scale[:, None]
    Y = design.Yresp[:, cols]
    bsq = float(np.sum(Y ** 2)) / design.n
    b = Y[:, 0] if len(cols) == 1 else Y
    return LassoProblem(Xs, b, levels, gram=G, atb=C, bsq=bsq)


def _warm(warm: FitResult | None, scale: np.ndarray, cols: Sequence[int], P: int, J: int):
    if warm is None or warm.B_selected.P != P or warm.B_selected.J != J:
        return None
    M = warm.B_selected.matrix[:, list(cols)]
    W = M / scale[:, None]
    return W[:, 0] if len(cols) == 1 else W


def _no_grouping_column(design, j, spec, cfg, weights, warm):
    J, P = design.J, design.P
    lam, gamma, alpha = spec.column(j)
    decay = LagDecayMatrix(alpha, P, J, spec.decay)
    own_cols = np.arange(P) * J + j
    if lam > 0 and gamma > 0:
        boost = np.ones(J)
        boost[j] = gamma / lam
        scale = build_transform(weights, decay, boost)
        levels = canonical_level(lam)
    else:
        scale = build_transform(weights, decay)
        levels = np.full(J * P, lam, dtype=float)
        levels[own_cols] = gamma
        levels = canonical_level(levels)
    prob = _scaled_problem(design, scale, [j], levels)
    res = solve_lasso(prob, cfg.with_warm_start(_warm(warm, scale, [j], P, J)))
    return scale * res.coef, res


def _assemble(design, spec, columns, Bmat, traces, conv, refit):
    P, J = design.P, design.J
    columns = tuple(columns)
    B_sel = CoefTensor.from_matrix(Bmat, P)
    if refit:
        ref, deficient = ols_refit(design, Bmat[:, list(columns)] != 0, columns)
        R = np.zeros_like(Bmat)
        R[:, list(columns)] = ref
        B_ref = CoefTensor.from_matrix(R, P)
    else:
        B_ref, deficient = B_sel, ()
    S1, S2 = _support_sets(B_sel.B, columns)
    return FitResult(B_sel, B_ref, S1, S2, columns, spec, traces, conv, deficient)


def fit_no_grouping(design: LagDesign, j, spec: PenaltySpec, cfg: SolverConfig = SolverConfig(),
                    weights=None, warm: FitResult | None = None, refit: bool = True) -> FitResult:
    """Column-by-column fit; ``j`` is one response column or a sequence of them.

    When both levels are positive the own-lag level is folded into the
    column scaling (scale ``mu_j * w_j`` with ``mu_j = gamma_j / lam_j``) and
    a single-level Lasso is solved; otherwise the two levels are applied per
    column.
    """
    if spec.mode != "no_grouping":
        raise DataError(f"fit_no_grouping needs a no_grouping spec, got {spec.mode}")
    spec.check_dims(design.J)
    cols = [int(j)] if np.isscalar(j) else [int(c) for c in j]
    Bmat = np.zeros((design.P * design.J, design.J))
    traces, conv = {}, {}
    for c in cols:
        beta, res = _no_grouping_column(design, c, spec, cfg, weights, warm)
        Bmat[:, c] = beta
        traces[c] = res.trace
        conv[c] = res.converged
    return _assemble(design, spec, cols, Bmat, traces, conv, refit)


def _universal_partition(J: int, P: int, k_cols: Sequence[int], row_vars: np.ndarray,
                         outside_level: float, own_level: float, inside_level: float) -> GroupPartition:
    """Partition of a JP x k coefficient block.

    For design row r carrying variable ``row_vars[r]``: if that variable is
    not among the response columns ``k_cols`` the whole row is one group
    (``outside_level``); otherwise the own entry is an l1 singleton
    (``own_level``) and the remaining entries of the row form one group
    (``inside_level``).
    """
    k = len(k_cols)
    pos = {v: c for c, v in enumerate(k_cols)}
    groups, glv, sing, slv = [], [], [], []
    for r, v in enumerate(row_vars):
        base = r * k
        if v not in pos:
            groups.append(base + np.arange(k))
            glv.append(outside_level)
            continue
        c_own = pos[v]
        sing.append(base + c_own)
        slv.append(own_level)
        rest = [base + c for c in range(k) if c != c_own]
        if rest:
            groups.append(np.array(rest))
            glv.append(inside_level)
    return GroupPartition(tuple(groups), np.array(glv), np.array(sing, dtype=np.int64), np.array(slv))


def fit_universal(design: LagDesign, spec: PenaltySpec, cfg: SolverConfig = SolverConfig(),
                  weights=None, warm: FitResult | None = None, refit: bool = True) -> FitResult:
    """Whole-matrix fit: each lag's off-diagonal row entries form one group, own lags are l1."""
    if spec.mode != "universal":
        raise DataError(f"fit_universal needs a universal spec, got {spec.mode}")
    J, P = design.J, design.P
    scale = build_transform(weights, LagDecayMatrix(spec.alpha, P, J, spec.decay))
    cols = list(range(J))
    prob = _scaled_problem(design, scale, cols)
    part = _universal_partition(J, P, cols, np.tile(np.arange(J), P), 0.0,
                                float(canonical_level(spec.gamma)), float(canonical_level(spec.lam)))
    res = solve_group_lasso(prob, part, cfg.with_warm_start(_warm(warm, scale, cols, P, J)))
    Bmat = scale[:, None] * res.coef.reshape(J * P, J)
    return _assemble(design, spec, cols, Bmat, {"all": res.trace}, {"all": res.converged}, refit)


def fit_segmentized(design: LagDesign, spec: PenaltySpec, cfg: SolverConfig = SolverConfig(),
                    weights=None, warm: FitResult | None = None, refit: bool = True,
                    segments: Sequence[int] | None = None) -> FitResult:
    """Segment-by-segment fit.

    Within segment N: rows of variables outside N are groups over the N
    response columns (level lam), own lags are l1 (gamma), and each inside
    variable's entries for the other members of N form a group (eta).
    """
    if spec.mode != "segmentized":
        raise DataError(f"fit_segmentized needs a segmentized spec, got {spec.mode}")
    spec.check_dims(design.J)
    J, P = design.J, design.P
    Bmat = np.zeros((J * P, J))
    traces, conv = {}, {}
    fitted = []
    seg_ids = range(len(spec.segments)) if segments is None else segments
    for s in seg_ids:
        cols = list(spec.segments[s])
        lam, gamma, eta, alpha = spec.segment(s)
        scale = build_transform(weights, LagDecayMatrix(alpha, P, J, spec.decay))
        prob = _scaled_problem(design, scale, cols)
        part = _universal_partition(J, P, cols, np.tile(np.arange(J), P),
                                    float(canonical_level(lam)), float(canonical_level(gamma)),
                                    float(canonical_level(eta)))
        res = solve_group_lasso(prob, part, cfg.with_warm_start(_warm(warm, scale, cols, P, J)))
        Bmat[:, cols] = scale[:, None] * res.coef.reshape(J * P, len(cols))
        traces[s] = res.trace
        conv[s] = res.converged
        fitted.extend(cols)
    return _assemble(design, spec, sorted(fitted), Bmat, traces, conv, refit)


def fit_var(design: LagDesign, spec: PenaltySpec, cfg: SolverConfig = SolverConfig(),
            weights=None, warm: FitResult | None = None, refit: bool = True) -> FitResult:
    """Fit every response column with the estimator selected by ``spec.mode``."""
    if spec.mode == "universal":
        return fit_universal(design, spec, cfg, weights, warm, refit)
    if spec.mode == "segmentized":
        return fit_segmentized(design, spec, cfg, weights, warm, refit)
    return fit_no_grouping(design, range(design.J), spec, cfg, weights, warm, refit)
