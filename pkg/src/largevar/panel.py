"""Multivariate panels, stationarity transforms, standardization and lag designs.

Panels are stored oldest-first: row 0 is the earliest observation. The lag
design keeps the same chronological row order; :meth:`LagDesign.newest_first`
gives the newest-first layout used when the regression is written in matrix
form. Row order does not affect least-squares objectives.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "TRANSFORM_CODES",
    "Panel",
    "StandardizationWeights",
    "LagDesign",
    "apply_transforms",
    "standardize",
    "destandardize",
    "build_lag_design",
    "read_panel_csv",
]

# code -> (take log, number of differences)
TRANSFORM_CODES = {
    "level": (False, 0),
    "log": (True, 0),
    "diff": (False, 1),
    "log-diff": (True, 1),
    "diff2": (False, 2),
    "log-diff2": (True, 2),
}


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Panel:
    """A T x J block of observations, oldest row first."""

    data: np.ndarray
    names: tuple[str, ...] = ()
    transform_codes: tuple[str, ...] = ()

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise DataError(f"panel data must be a non-empty T x J matrix, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            bad = np.argwhere(~np.isfinite(data))[0]
            raise DataError(f"non-finite value at row {bad[0]}, column {bad[1]}")
        J = data.shape[1]
        names = tuple(self.names) if self.names else tuple(f"y{j}" for j in range(J))
        codes = tuple(self.transform_codes) if self.transform_codes else ("level",) * J
        if len(names) != J or len(codes) != J:
            raise DataError(f"expected {J} names and codes, got {len(names)} and {len(codes)}")
        object.__setattr__(self, "data", _readonly(data))
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "transform_codes", codes)

    @property
    def T(self) -> int:
        return self.data.shape[0]

    @property
    def J(self) -> int:
        return self.data.shape[1]

    def rows(self, start: int, stop: int) -> "Panel":
        """Sub-panel of rows ``start:stop`` (chronological)."""
        return Panel(self.data[start:stop], self.names, self.transform_codes)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"unknown variable {name!r}") from None


@dataclass(frozen=True)
class StandardizationWeights:
    """Per-variable scale ``w`` and location ``means`` used to standardize a panel."""

    w: np.ndarray
    means: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.w, dtype=float))
        means = np.atleast_1d(np.asarray(self.means, dtype=float))
        if w.shape != means.shape or w.ndim != 1:
            raise DataError("weights and means must be 1-d arrays of equal length")
        if np.any(~(w > 0)):
            raise DataError("standardization weights must be positive")
        object.__setattr__(self, "w", _readonly(w))
        object.__setattr__(self, "means", _readonly(means))

    @classmethod
    def identity(cls, J: int) -> "StandardizationWeights":
        return cls(np.ones(J), np.zeros(J))

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.means) / self.w

    def invert(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float) * self.w + self.means


def apply_transforms(raw, codes: Sequence[str] | str, names: Sequence[str] | None = None) -> Panel:
    """Apply per-variable stationarity transforms.

    Each code is one of ``level``, ``log``, ``diff``, ``log-diff``, ``diff2``
    or ``log-diff2``. Leading rows lost to differencing are dropped for every
    column so the result stays aligned; the output has
    ``T0 - max differencing depth`` rows.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim == 1:
        raw = raw[:, None]
    T0, J = raw.shape
    if isinstance(codes, str):
        codes = [codes] * J
    codes = list(codes)
    if len(codes) != J:
        raise DataError(f"{len(codes)} transform codes for {J} variables")
    names = list(names) if names is not None else [f"y{j}" for j in range(J)]
    for j, code in enumerate(codes):
        if code not in TRANSFORM_CODES:
            raise DataError(f"unknown transform code {code!r} for variable {names[j]!r}")
    depth = max(TRANSFORM_CODES[c][1] for c in codes)
    if T0 - depth < 1:
        raise DataError(f"{T0} rows cannot absorb differencing depth {depth}")

    out = np.empty((T0 - depth, J))
    for j, code in enumerate(codes):
        take_log, ndiff = TRANSFORM_CODES[code]
        col = raw[:, j]
        if take_log:
            bad = np.flatnonzero(~(col > 0))
            if bad.size:
                raise DataError(
                    f"log transform of variable {names[j]!r} needs positive values; "
                    f"row {bad[0]} has {col[bad[0]]!r}"
                )
            col = np.log(col)
        if ndiff:
            col = np.diff(col, n=ndiff)
        out[:, j] = col[len(col) - (T0 - depth):]
    return Panel(out, tuple(names), tuple(codes))


def standardize(panel: Panel, window: tuple[int, int] | slice | None = None) -> tuple[Panel, StandardizationWeights]:
    """Center and scale every column using statistics from ``window`` rows only.

    ``window`` is a ``(start, stop)`` row range or a slice; the default is the
    whole panel. Scale is the population standard deviation (``ddof=0``).
    """
    if window is None:
        sl = slice(0, panel.T)
    elif isinstance(window, slice):
        sl = window
    else:
        sl = slice(*window)
    block = panel.data[sl]
    if block.shape[0] < 2:
        raise DataError("standardization window needs at least 2 rows")
    means = block.mean(axis=0)
    sd = np.sqrt(((block - means) ** 2).mean(axis=0))
    zero = np.flatnonzero(~(sd > 0))
    if zero.size:
        raise DataError(f"variable {panel.names[zero[0]]!r} has zero variance on the window")
    weights = StandardizationWeights(sd, means)
    return Panel(weights.apply(panel.data), panel.names, panel.transform_codes), weights


def destandardize(panel: Panel, weights: StandardizationWeights) -> Panel:
    return Panel(weights.invert(panel.data), panel.names, panel.transform_codes)


@dataclass(frozen=True)
class LagDesign:
    """Regressors and responses of a VAR(P) regression.

    Row ``r`` of ``X`` holds ``(Y_{t-1}, ..., Y_{t-P})`` for the response row
    ``Yresp[r] = Y_t`` where ``t = times[r]``. Design column ``(p - 1) * J + i``
    carries variable ``i`` at lag ``p`` (``column_map[col] == (p, i)``).
    """

    X: np.ndarray
    Yresp: np.ndarray
    P: int
    times: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def J(self) -> int:
        return self.Yresp.shape[1]

    @cached_property
    def column_map(self) -> np.ndarray:
        p, i = np.divmod(np.arange(self.P * self.J), self.J)
        return _readonly(np.column_stack([p + 1, i])).astype(int)

    def column_of(self, p: int, i: int) -> int:
        if not (1 <= p <= self.P and 0 <= i < self.J):
            raise IndexError(f"(lag {p}, variable {i}) outside design")
        return (p - 1) * self.J + i

    @cached_property
    def gram(self) -> np.ndarray:
        """``X^T X / n``."""
        return _readonly(self.X.T @ self.X / self.n)

    @cached_property
    def xty(self) -> np.ndarray:
        """``X^T Y / n`` (JP x J)."""
        return _readonly(self.X.T @ self.Yresp / self.n)

    def newest_first(self) -> tuple[np.ndarray, np.ndarray]:
        return self.X[::-1], self.Yresp[::-1]


def build_lag_design(panel: Panel | np.ndarray, P: int) -> LagDesign:
    data = panel.data if isinstance(panel, Panel) else np.asarray(panel, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    T, J = data.shape
    if P < 1:
        raise DataError(f"lag order must be >= 1, got {P}")
    if P >= T:
        raise DataError(f"lag order {P} needs more than {T} observations")
    X = np.hstack([data[P - p:T - p] for p in range(1, P + 1)])
    return LagDesign(_readonly(X), _readonly(data[P:]), P, np.arange(P, T))


def read_panel_csv(path, variables: Sequence[str] | None = None) -> tuple[np.ndarray, list[str]]:
    """Read a header-first CSV (one column per variable, oldest row first)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    data = np.array(rows)
    if variables:
        missing = [v for v in variables if v not in header]
        if missing:
            raise DataError(f"{path}: variable(s) not found in header: {', '.join(missing)}")
        idx = [header.index(v) for v in variables]
        return data[:, idx], list(variables)
    return data, header
