"""Seeded synthetic NDVI-like scenes for the evaluation harness.

Each pixel follows a double-logistic seasonal curve whose base level,
amplitude and green-up/senescence timing vary smoothly in space. Years differ
by a regional amplitude anomaly, a mild linear trend and small timing shifts.
Clouds are spatially coherent blobs whose coverage peaks in a wet season;
marginal samples are biased low, cloudy samples strongly so.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .grid import DEFAULT_ND, RI, Stack


@dataclass(frozen=True)
class SynthConfig:
    height: int = 64
    width: int = 64
    years: int = 18
    nd: int = DEFAULT_ND
    seed: int = 0
    cloud_rate: float = 0.215
    marginal_rate: float = 0.10
    nodata_rate: float = 0.005
    noise_sd: float = 0.005
    trend: float = 0.08
    fill_value: float = -1.0


@dataclass
class SyntheticScene:
    stack: Stack
    truth: np.ndarray  # (H, W, T) noise-free curves


def _smooth_field(rng, shape, sigma):
    f = gaussian_filter(rng.standard_normal(shape), sigma=sigma, mode="wrap")
    return (f - f.mean()) / (f.std() + 1e-12)


def _logistic(x):
    return 1.0 / (1.0 + np.exp(-x))


def synthesize(cfg: SynthConfig = SynthConfig()) -> SyntheticScene:
    rng = np.random.default_rng(cfg.seed)
    H, W, ny, nd = cfg.height, cfg.width, cfg.years, cfg.nd
    sigma = max(H, W) / 8.0

    base = 0.20 + 0.05 * _smooth_field(rng, (H, W), sigma)
    amp = 0.45 + 0.08 * _smooth_field(rng, (H, W), sigma)
    sos = 0.30 * nd + 0.06 * nd * _smooth_field(rng, (H, W), sigma)
    eos = 0.74 * nd + 0.06 * nd * _smooth_field(rng, (H, W), sigma)
    slope = 1.3 + 0.2 * _smooth_field(rng, (H, W), sigma)

    year_amp = 1.0 + rng.normal(0.0, 0.04, ny)
    year_amp *= 1.0 + cfg.trend * (np.arange(ny) - (ny - 1) / 2) / max(ny, 1)
    year_shift = rng.normal(0.0, 0.4, ny)
    local_shift = 0.2 * np.stack([_smooth_field(rng, (H, W), sigma) for _ in range(ny)], axis=-1)

    d = np.arange(nd) + 0.5
    truth = np.empty((H, W, ny, nd))
    for y in range(ny):
        shift = year_shift[y] + local_shift[:, :, y]
        rise = _logistic((d[None, None, :] - (sos + shift)[..., None]) / slope[..., None])
        fall = _logistic((d[None, None, :] - (eos + shift)[..., None]) / slope[..., None])
        truth[:, :, y] = base[..., None] + (amp * year_amp[y])[..., None] * (rise - fall)
    truth = np.clip(truth.reshape(H, W, ny * nd), -1.0, 1.0)
    T = ny * nd

    # wet-season cloud probability, spatially coherent through thresholded fields
    season = 1.0 + 0.9 * np.sin(2 * np.pi * (np.arange(T) % nd - 0.2 * nd) / nd)
    p_cloud = np.clip(cfg.cloud_rate * season, 0.0, 0.95)
    rel = np.full((H, W, T), RI.GOOD, dtype=np.uint8)
    for t in range(T):
        field = _smooth_field(rng, (H, W), max(H, W) / 16.0)
        cut = np.quantile(field, p_cloud[t])
        rel[:, :, t][field < cut] = RI.CLOUDY
    good = rel == RI.GOOD
    rel[good & (rng.random((H, W, T)) < cfg.marginal_rate)] = RI.MARGINAL
    rel[rng.random((H, W, T)) < cfg.nodata_rate] = RI.NODATA

    values = truth + rng.normal(0.0, cfg.noise_sd, truth.shape)
    marg = rel == RI.MARGINAL
    values[marg] = truth[marg] * (1.0 - rng.uniform(0.0, 0.1, marg.sum()))
    cloudy = rel == RI.CLOUDY
    values[cloudy] = truth[cloudy] * rng.uniform(0.2, 0.7, cloudy.sum())
    values[rel == RI.NODATA] = cfg.fill_value

    stack = Stack(values, rel, nd=nd, fill_value=cfg.fill_value)
    return SyntheticScene(stack, truth)
