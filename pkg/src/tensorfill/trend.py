"""l1 trend filtering and the noisy-sample lifting procedure built on it.

``l1_trend_filter`` minimises ``0.5 * ||y - z||^2 + lam * ||D z||_1`` with D the
second-difference operator. An ADMM on ``u = D z`` (soft-thresholding ``u``,
banded Cholesky solve for ``z``) identifies the kink set; the solution is then
polished by solving the KKT system on that kink set exactly and is accepted
only once a subgradient certificate holds. Many series are solved at once;
every step is vectorised across rows.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded, solveh_banded

from .exceptions import NumericalError, ParameterError, ShapeError

WARM_STEPS = 50


class Flag(IntEnum):
    GOOD = 0
    NOISY = 1


@dataclass
class Series:
    """One pixel's time series. Missing samples carry NaN and ``valid=False``."""

    values: np.ndarray
    flags: np.ndarray
    valid: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.flags = np.asarray(self.flags, dtype=np.uint8)
        if self.valid is None:
            self.valid = np.isfinite(self.values)
        self.valid = np.asarray(self.valid, dtype=bool)
        if not (self.values.shape == self.flags.shape == self.valid.shape) or self.values.ndim != 1:
            raise ShapeError("series values, flags and valid must be equal-length 1-D arrays")


@dataclass(frozen=True)
class FilterParams:
    lam: float = 1.0
    solver_tol: float = 1e-6
    solver_max_iters: int = 2000

    def __post_init__(self):
        if self.lam < 0:
            raise ParameterError(f"lambda must be non-negative, got {self.lam}")
        if self.solver_tol <= 0 or self.solver_max_iters < 1:
            raise ParameterError("solver_tol and solver_max_iters must be positive")


def second_diff_matrix(n: int) -> np.ndarray:
    """Dense ``(n-2, n)`` second-difference operator."""
    if n < 3:
        raise ShapeError(f"second differences need n >= 3, got {n}")
    D = np.zeros((n - 2, n))
    i = np.arange(n - 2)
    D[i, i] = 1.0
    D[i, i + 1] = -2.0
    D[i, i + 2] = 1.0
    return D


def _d(z):
    return z[..., :-2] - 2.0 * z[..., 1:-1] + z[..., 2:]


def _dt(x):
    out = np.zeros(x.shape[:-1] + (x.shape[-1] + 2,))
    out[..., :-2] += x
    out[..., 1:-1] -= 2.0 * x
    out[..., 2:] += x
    return out


def _dtd_banded(n: int, rho: float) -> np.ndarray:
    """Upper banded storage of ``I + rho * D^T D``."""
    diag = np.full(n, 6.0)
    diag[[0, -1]] = 1.0
    diag[[1, -2]] = 5.0
    off1 = np.full(n, -4.0)
    off1[[1, -1]] = -2.0
    off2 = np.ones(n)
    ab = np.zeros((3, n))
    ab[2] = 1.0 + rho * diag
    ab[1] = rho * off1
    ab[1, 0] = 0.0
    ab[0] = rho * off2
    ab[0, :2] = 0.0
    return ab


def optimality_residual(y, z, lam: float, zero_tol: float = 1e-8) -> float:
    """Largest violation of the subgradient condition for ``z`` at ``lam``.

    Solves ``D^T g = (y - z) / lam`` exactly (double cumulative sum) and
    reports the worst of: the stationarity residual, ``|g| > 1``,
    and ``g != sign(Dz)`` where ``|Dz| > zero_tol``.
    """
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if lam == 0:
        return float(np.max(np.abs(y - z)))
    cc = np.cumsum(np.cumsum((y - z) / lam, axis=-1), axis=-1)
    g = cc[..., :-2]
    worst = np.abs(cc[..., -2:]).max(axis=-1)
    worst = np.maximum(worst, np.maximum(np.abs(g) - 1.0, 0.0).max(axis=-1))
    dz = _d(z)
    kink = np.abs(dz) > zero_tol
    mismatch = np.where(kink, np.abs(g - np.sign(dz)), 0.0).max(axis=-1)
    return float(np.max(np.maximum(worst, mismatch)))


def _free_solve(y, lam, state):
    """Dual on the free set for a fixed sign pattern; returns ``(z, dual)``."""
    n = y.size
    free = np.flatnonzero(state == 0)
    base = y - lam * _dt(state)
    dual = np.zeros(n - 2)
    if free.size:
        diff1 = np.diff(free)
        diff2 = free[2:] - free[:-2]
        ab = np.zeros((3, free.size))
        ab[2] = 6.0
        ab[1, 1:] = np.where(diff1 == 1, -4.0, np.where(diff1 == 2, 1.0, 0.0))
        ab[0, 2:] = np.where(diff2 == 2, 1.0, 0.0)
        dual[free] = solveh_banded(ab, _d(base)[free])
    return base - _dt(dual), dual


def _active_set(y: np.ndarray, lam: float, start: np.ndarray, single: bool, max_steps: int):
    """Active-set solve of the dual box QP from a starting sign pattern.

    ``start[i]`` is +1/-1 where ``(Dz)_i`` is taken to be positive/negative
    (dual at its bound) and 0 where ``(Dz)_i`` is taken to be zero. Each step
    solves the equality-constrained problem for the pattern and then flips
    either every violated index (primal-dual active set) or only the worst one.
    Returns the exact minimiser once the pattern is self-consistent, else None.
    """
    state = start.astype(np.float64)
    tol = 1e-11 * max(1.0, lam)
    seen = set()
    for _ in range(max_steps):
        try:
            z, dual = _free_solve(y, lam, state)
        except np.linalg.LinAlgError:
            return None
        viol = np.where(state == 0, np.abs(dual) - lam, -state * _d(z))
        bad = viol > tol
        if not bad.any():
            return z
        if not single:
            key = state.tobytes()
            if key in seen:
                return None
            seen.add(key)
            flip = np.flatnonzero(bad)
        else:
            flip = [int(np.argmax(viol))]
        for i in flip:
            state[i] = np.sign(dual[i]) if state[i] == 0 else 0.0
    return None


def _solve_one(y, lam, start):
    z = _active_set(y, lam, start, single=False, max_steps=40)
    if z is None:
        z = _active_set(y, lam, start, single=True, max_steps=2 * y.size)
    return z


class _WarmStart:
    """Batched scaled-form ADMM on ``u = D z`` with residual-balanced penalty."""

    def __init__(self, Y, lam):
        self.Y = Y
        self.lam = lam
        P, n = Y.shape
        self.U = np.zeros((P, n - 2))
        self.V = np.zeros((P, n - 2))
        self._set_rho(10.0 * lam)

    def _set_rho(self, rho):
        self.rho = rho
        self.chol = cholesky_banded(_dtd_banded(self.Y.shape[1], rho))

    def run(self, rows, steps):
        Y, U, V = self.Y[rows], self.U[rows], self.V[rows]
        lam = self.lam
        for k in range(1, steps + 1):
            rho = self.rho
            Z = cho_solve_banded((self.chol, False), (Y + rho * _dt(U - V)).T).T
            DZ = _d(Z)
            W = DZ + V
            U_new = np.sign(W) * np.maximum(np.abs(W) - lam / rho, 0.0)
            V = V + DZ - U_new
            if k % 10 == 0:
                primal = np.linalg.norm(DZ - U_new)
                dual = rho * np.linalg.norm(_dt(U_new - U))
                if primal > 10 * dual:
                    V = V / 2.0
                    self._set_rho(rho * 2.0)
                elif dual > 10 * primal:
                    V = V * 2.0
                    self._set_rho(rho / 2.0)
            U = U_new
        self.U[rows], self.V[rows] = U, V


def l1_trend_filter_batch(Y: np.ndarray, params: FilterParams = FilterParams()) -> np.ndarray:
    """Row-wise l1 trend filter of a ``(P, n)`` array.

    Raises :class:`NumericalError` if some row has no certified solution after
    ``params.solver_max_iters`` warm-start iterations.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[1] < 3:
        raise ShapeError(f"expected a (P, n>=3) array, got shape {Y.shape}")
    if not np.all(np.isfinite(Y)):
        raise ParameterError("trend filter input must be finite")
    lam = float(params.lam)
    if lam == 0 or Y.shape[0] == 0:
        return Y.copy()
    warm = _WarmStart(Y, lam)
    out = np.empty_like(Y)
    todo = np.arange(Y.shape[0])
    used = 0
    while todo.size and used < params.solver_max_iters:
        steps = min(WARM_STEPS * (1 + used // WARM_STEPS), params.solver_max_iters - used)
        warm.run(todo, steps)
        used += steps
        done = np.zeros(todo.size, dtype=bool)
        for k, p in enumerate(todo):
            z = _solve_one(Y[p], lam, np.sign(warm.U[p]))
            if z is not None and optimality_residual(Y[p], z, lam) <= params.solver_tol:
                out[p] = z
                done[k] = True
        todo = todo[~done]
    if todo.size:
        raise NumericalError(
            f"l1 trend filter found no certified solution for {todo.size} series "
            f"after {used} iterations"
        )
    return out


def l1_trend_filter(y, params: FilterParams = FilterParams()) -> np.ndarray:
    """Minimiser of ``0.5 * ||y - z||^2 + lam * ||D z||_1`` for a 1-D series."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise ShapeError(f"expected a 1-D series, got shape {y.shape}")
    return l1_trend_filter_batch(y[None, :], params)[0]


def lift_noisy(y: np.ndarray, z: np.ndarray, noisy: np.ndarray) -> np.ndarray:
    """Replace noisy samples lying strictly below the smoothed curve."""
    return np.where(noisy & (y < z), z, y)


def iterative_filter_batch(Y, noisy, params: FilterParams = FilterParams()) -> np.ndarray:
    """Three-pass filter on rows of ``Y``.

    Passes one and two smooth and lift noisy samples that fall below the
    smoothed series; good samples and noisy samples above it are kept. The
    third pass smooths the result without replacement and is returned.
    """
    return l1_trend_filter_batch(lift_passes(Y, noisy, params), params)


def lift_passes(Y, noisy, params: FilterParams = FilterParams(), passes: int = 2) -> np.ndarray:
    """The lifting passes alone: smooth, then raise noisy samples below the fit."""
    Y = np.asarray(Y, dtype=np.float64)
    noisy = np.asarray(noisy, dtype=bool)
    if noisy.shape != Y.shape:
        raise ShapeError(f"flags {noisy.shape} do not match values {Y.shape}")
    for _ in range(passes):
        Y = lift_noisy(Y, l1_trend_filter_batch(Y, params), noisy)
    return Y


def iterative_filter(s: Series, params: FilterParams = FilterParams()) -> np.ndarray:
    return iterative_filter_batch(s.values[None, :], (s.flags == Flag.NOISY)[None, :], params)[0]
