"""Adaptive-weighted low-rank tensor completion.

The solver minimises ``sum_n w_n ||X_(n)||_*`` subject to ``X == Y`` on the
observed entries with a HaLRTC-style ADMM: one auxiliary tensor and one dual
per mode, singular value thresholding for the auxiliaries, and a hard reset of
the observed entries after every averaging step. The mode weights start equal
and are re-estimated from the unfolding spectra of the current estimate.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    DegenerateSpectrumError,
    EmptyPatchError,
    NumericalError,
    ParameterError,
)
from .grid import DEFAULT_ND, Patch, RearrangedTensor, fold, inverse_rearrange, rearrange, unfold

log = logging.getLogger(__name__)

RHO_MAX = 1e6


class DegenerateSpectrumWarning(UserWarning):
    """An unfolding had an all-zero spectrum during a weight update."""


@dataclass(frozen=True)
class WeightVector:
    w: tuple

    def __post_init__(self):
        w = tuple(float(x) for x in self.w)
        if len(w) != 3 or min(w) <= 0 or abs(sum(w) - 1.0) > 1e-12:
            raise ParameterError(f"mode weights must be positive and sum to 1, got {w}")
        object.__setattr__(self, "w", w)

    @classmethod
    def equal(cls) -> "WeightVector":
        return cls((1 / 3, 1 / 3, 1 / 3))

    @classmethod
    def from_k_norm(cls, k_norm) -> "WeightVector":
        """Weights inversely proportional to the normalised spectral ranks."""
        inv = 1.0 / np.asarray(k_norm, dtype=np.float64)
        w = inv / inv.sum()
        # push rounding error into the largest entry so the sum is exact to 1e-12
        w[np.argmax(w)] += 1.0 - w.sum()
        return cls(tuple(w))

    def __iter__(self):
        return iter(self.w)

    def __getitem__(self, i):
        return self.w[i]


@dataclass(frozen=True)
class CompletionParams:
    tau: float = 0.85
    rho: float = 0.1
    rho_growth: float = 1.05
    max_iters: int = 100
    tol: float = 1e-4
    weight_update_every: int = 1
    use_rearranged_form: bool = True

    def __post_init__(self):
        if not 0 < self.tau < 1:
            raise ParameterError(f"tau must lie in (0, 1), got {self.tau}")
        if self.rho <= 0:
            raise ParameterError(f"rho must be positive, got {self.rho}")
        if self.rho_growth < 1:
            raise ParameterError(f"rho_growth must be >= 1, got {self.rho_growth}")
        if self.max_iters < 1 or self.weight_update_every < 1:
            raise ParameterError("max_iters and weight_update_every must be positive")
        if self.tol <= 0:
            raise ParameterError(f"tol must be positive, got {self.tol}")


@dataclass(frozen=True)
class SpectrumSummary:
    singular_values: np.ndarray
    k: int
    k_norm: float


def svt(M: np.ndarray, threshold: float) -> np.ndarray:
    """Singular value soft-thresholding, the prox of ``threshold * ||.||_*``."""
    if threshold < 0:
        raise ParameterError(f"threshold must be non-negative, got {threshold}")
    try:
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge for a {M.shape[0]}x{M.shape[1]} matrix") from exc
    s = np.maximum(s - threshold, 0.0)
    r = np.count_nonzero(s)
    return (U[:, :r] * s[:r]) @ Vt[:r]


def spectral_k(sigma, tau: float) -> int:
    """Smallest k whose leading singular values hold a ``tau`` share of the total."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.size == 0:
        raise ParameterError("empty spectrum")
    total = sigma.sum()
    if total <= 0:
        raise DegenerateSpectrumError("all singular values are zero")
    frac = np.cumsum(sigma) / total
    # guard against cumsum rounding leaving the last entry a hair under 1
    frac[-1] = 1.0
    return int(np.searchsorted(frac, tau, side="left")) + 1


def spectrum_summary(matrix: np.ndarray, tau: float) -> SpectrumSummary:
    s = np.linalg.svd(matrix, compute_uv=False)
    k = spectral_k(s, tau)
    return SpectrumSummary(s, k, k / s.size)


def update_weights(X, tau: float = 0.85) -> WeightVector:
    """Re-estimate mode weights from the unfolding spectra of ``X``."""
    data = X.data if isinstance(X, RearrangedTensor) else np.asarray(X)
    if not np.all(np.isfinite(data)):
        raise NumericalError("weight update on a non-finite tensor")
    k_norm = []
    for mode in (1, 2, 3):
        try:
            k_norm.append(spectrum_summary(unfold(data, mode), tau).k_norm)
        except DegenerateSpectrumError:
            warnings.warn(
                f"mode-{mode} unfolding has an all-zero spectrum; using k_norm=1",
                DegenerateSpectrumWarning,
                stacklevel=2,
            )
            k_norm.append(1.0)
    return WeightVector.from_k_norm(k_norm)


def initial_fill(Y: RearrangedTensor) -> RearrangedTensor:
    """Fill missing entries with same-day means across years.

    Falls back to the pixel mean and then the global mean of valid entries.
    """
    data, om = Y.data, Y.omega
    if not om.any():
        raise EmptyPatchError("tensor has no valid entry")
    vals = np.where(om, data, 0.0)
    out = np.where(om, data, np.nan)

    cnt = om.sum(axis=2)
    day_mean = np.divide(vals.sum(axis=2), cnt, out=np.full(cnt.shape, np.nan), where=cnt > 0)
    out = np.where(np.isnan(out), day_mean[:, :, None], out)

    pcnt = om.sum(axis=(1, 2))
    pix_mean = np.divide(vals.sum(axis=(1, 2)), pcnt, out=np.full(pcnt.shape, np.nan), where=pcnt > 0)
    out = np.where(np.isnan(out), pix_mean[:, None, None], out)

    out = np.where(np.isnan(out), vals.sum() / om.sum(), out)
    return RearrangedTensor(out, om.copy())


def _initial_fill_original(data: np.ndarray, om: np.ndarray) -> np.ndarray:
    # raw (h, w, T) form has no year axis, so only the pixel and global means apply
    if not om.any():
        raise EmptyPatchError("patch has no valid entry")
    vals = np.where(om, data, 0.0)
    cnt = om.sum(axis=2)
    pix_mean = np.divide(vals.sum(axis=2), cnt, out=np.full(cnt.shape, np.nan), where=cnt > 0)
    pix_mean = np.where(np.isnan(pix_mean), vals.sum() / om.sum(), pix_mean)
    return np.where(om, data, pix_mean[:, :, None])


def _admm(Y: np.ndarray, om: np.ndarray, X0: np.ndarray, params: CompletionParams):
    shape = Y.shape
    obs = Y[om]
    X = X0.copy()
    X[om] = obs
    w = WeightVector.equal()
    rho = params.rho
    duals = [np.zeros(shape) for _ in range(3)]
    M = [None] * 3
    it = 0
    for it in range(1, params.max_iters + 1):
        for n in range(3):
            mat = unfold(X + duals[n] / rho, n + 1)
            M[n] = fold(svt(mat, w[n] / rho), n + 1, shape)
        X_new = sum(M[n] - duals[n] / rho for n in range(3)) / 3.0
        X_new[om] = obs
        if not np.all(np.isfinite(X_new)):
            raise NumericalError(f"non-finite estimate at iteration {it}")
        for n in range(3):
            duals[n] += rho * (X_new - M[n])
        rho = min(rho * params.rho_growth, RHO_MAX)

        change = np.linalg.norm(X_new - X) / max(np.linalg.norm(X), np.finfo(float).eps)
        X = X_new
        if it % params.weight_update_every == 0:
            w = update_weights(X, params.tau)
        if change < params.tol:
            break
    return X, w, it


def complete(Y: RearrangedTensor, params: CompletionParams = CompletionParams()):
    """Complete a rearranged tensor.

    Returns
    -------
    (RearrangedTensor, WeightVector, int)
        The estimate (equal to ``Y`` on its observed entries, with ``omega``
        copied from ``Y``), the final mode weights and the iteration count.
    """
    X0 = initial_fill(Y).data
    X, w, it = _admm(Y.data, Y.omega, X0, params)
    return RearrangedTensor(X, Y.omega.copy()), w, it


def complete_patch(
    patch: Patch, params: CompletionParams = CompletionParams(), nd: int = DEFAULT_ND
) -> Patch:
    """Gap-fill one ``(h, w, T)`` patch.

    With ``params.use_rearranged_form`` the patch is solved as an
    ``(h*w, nd, ny)`` tensor; otherwise the ADMM runs on the raw patch.
    Raises :class:`EmptyPatchError` when nothing in the patch is observed.
    """
    if patch.omega.all():
        return Patch(patch.data.copy(), patch.omega.copy())
    if params.use_rearranged_form:
        X, _, _ = complete(rearrange(patch, nd), params)
        out = inverse_rearrange(X, patch.data.shape[:2])
        return Patch(out.data, patch.omega.copy())
    X0 = _initial_fill_original(patch.data, patch.omega)
    X, _, _ = _admm(patch.data, patch.omega, X0, params)
    return Patch(X, patch.omega.copy())
