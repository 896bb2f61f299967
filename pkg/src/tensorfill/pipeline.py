"""Scene-level reconstruction: tiling, per-patch completion, per-pixel filtering."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .completion import CompletionParams, complete_patch
from .exceptions import EmptyPatchError, NumericalError, ParameterError, TensorfillError
from .grid import RI, Patch, Stack
from .trend import FilterParams, iterative_filter_batch

log = logging.getLogger(__name__)


class Method(str, Enum):
    TENSOR = "tensor"
    TENSOR_ORIGINAL_FORM = "tensor_original"
    LINEAR = "linear"


@dataclass(frozen=True)
class PipelineParams:
    patch_size: int = 8
    completion: CompletionParams = field(default_factory=CompletionParams)
    filter: FilterParams = field(default_factory=FilterParams)
    workers: int = 1
    apply_filter: bool = True

    def __post_init__(self):
        if self.patch_size < 2:
            raise ParameterError(f"patch_size must be >= 2, got {self.patch_size}")
        if self.workers < 1:
            raise ParameterError(f"workers must be >= 1, got {self.workers}")


def prefill_linear(series, valid) -> np.ndarray:
    """Linear interpolation in time over invalid samples.

    Leading and trailing gaps take the nearest valid value.
    """
    series = np.asarray(series, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    if not valid.any():
        raise EmptyPatchError("series has no valid sample")
    t = np.arange(series.size)
    out = series.copy()
    out[~valid] = np.interp(t[~valid], t[valid], series[valid])
    return out


def tiles(height: int, width: int, size: int):
    """Non-overlapping ``(rows, cols)`` slices; edge tiles may be smaller."""
    for r in range(0, height, size):
        for c in range(0, width, size):
            yield slice(r, min(r + size, height)), slice(c, min(c + size, width))


def _complete_tile(args):
    data, omega, params, nd = args
    try:
        return complete_patch(Patch(data, omega), params, nd).data, None
    except (TensorfillError, np.linalg.LinAlgError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def fill_gaps(stack: Stack, params: PipelineParams = PipelineParams(),
              method: Method = Method.TENSOR):
    """Gap-fill every pixel, without filtering.

    Returns ``(values, filled)`` where ``filled`` marks pixels that received
    an estimate; the rest hold ``stack.fill_value``.
    """
    method = Method(method)
    H, W, T = stack.values.shape
    om = stack.omega
    values = np.full((H, W, T), stack.fill_value, dtype=np.float64)
    has_obs = om.any(axis=2)

    if method is Method.LINEAR:
        for i, j in zip(*np.nonzero(has_obs)):
            values[i, j] = prefill_linear(stack.values[i, j], om[i, j])
        return values, has_obs.copy()

    cparams = params.completion
    if method is Method.TENSOR_ORIGINAL_FORM:
        cparams = replace(cparams, use_rearranged_form=False)
    elif not cparams.use_rearranged_form:
        cparams = replace(cparams, use_rearranged_form=True)

    regions = list(tiles(H, W, params.patch_size))
    jobs = [(stack.values[r, c], om[r, c], cparams, stack.nd) for r, c in regions]
    if params.workers > 1:
        with ProcessPoolExecutor(max_workers=params.workers) as pool:
            results = list(pool.map(_complete_tile, jobs))
    else:
        results = [_complete_tile(j) for j in jobs]

    filled = has_obs.copy()
    for (r, c), (data, err) in zip(regions, results):
        if data is None:
            if om[r, c].any():
                log.warning("patch rows %s cols %s failed (%s); writing fill value",
                            (r.start, r.stop), (c.start, c.stop), err)
            filled[r, c] = False
            continue
        values[r, c] = data
    values[~filled] = stack.fill_value
    return values, filled


def filter_pixels(values: np.ndarray, reliability: np.ndarray, pixels: np.ndarray,
                  params: FilterParams) -> np.ndarray:
    """Apply the three-pass filter to the selected pixels' series in place."""
    idx = np.nonzero(pixels)
    if idx[0].size == 0 or values.shape[2] < 3:
        return values
    Y = values[idx]
    noisy = reliability[idx] != RI.GOOD
    try:
        values[idx] = iterative_filter_batch(Y, noisy, params)
    except NumericalError:
        log.warning("batch filtering failed; retrying pixel by pixel")
        for k, (i, j) in enumerate(zip(*idx)):
            try:
                values[i, j] = iterative_filter_batch(Y[k:k + 1], noisy[k:k + 1], params)[0]
            except NumericalError as exc:
                log.warning("pixel (%d, %d) left unfiltered: %s", i, j, exc)
    return values


def reconstruct_scene(stack: Stack, params: PipelineParams = PipelineParams(),
                      method: Method = Method.TENSOR) -> Stack:
    """Gap-fill and denoise a whole stack.

    Every pixel with at least one valid observation comes back gap-free with
    reliability GOOD on its non-padding steps; pixels without any, or inside a
    patch whose completion failed, hold ``fill_value`` and NODATA.
    """
    values, filled = fill_gaps(stack, params, method)
    n = stack.n_real
    if params.apply_filter:
        real = np.ascontiguousarray(values[:, :, :n])
        values[:, :, :n] = filter_pixels(real, stack.reliability[:, :, :n], filled, params.filter)

    rel = np.full(stack.values.shape, RI.NODATA, dtype=np.uint8)
    rel[:, :, :n][filled] = RI.GOOD
    values[~filled] = stack.fill_value
    values[:, :, n:] = stack.fill_value
    return Stack(values, rel, nd=stack.nd, fill_value=stack.fill_value, pad=stack.pad)
