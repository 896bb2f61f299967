"""Simulation and scoring harness: reference curves, contamination, gap
scenarios, MAE reports and parameter sweeps."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np

from .exceptions import ParameterError, ShapeError, TensorfillError
from .grid import RI, Stack
from .pipeline import Method, PipelineParams, fill_gaps, reconstruct_scene

log = logging.getLogger(__name__)

MIN_GOOD_YEARS = 4
MARGINAL_FACTOR = 0.95
MAE_BIN_EDGES = (0.01, 0.015, 0.02, 0.025)
MAE_BIN_LABELS = ("<0.01", "0.01-0.015", "0.015-0.02", "0.02-0.025", ">0.025")


# -- reference curves and contamination --------------------------------------

def build_reference(stack: Stack) -> Stack:
    """One synthetic year per pixel from multi-year GOOD observations.

    A day-of-year with at least four GOOD samples takes their mean; other days
    are linearly interpolated around the (cyclic) year. Pixels with no
    qualifying day are excluded: NODATA and ``fill_value``.
    """
    if stack.ny < MIN_GOOD_YEARS:
        raise ParameterError(f"need at least {MIN_GOOD_YEARS} years, got {stack.ny}")
    H, W, _ = stack.values.shape
    nd, ny = stack.nd, stack.ny
    vals = stack.values.reshape(H, W, ny, nd)
    good = stack.reliability.reshape(H, W, ny, nd) == RI.GOOD
    cnt = good.sum(axis=2)
    mean = np.where(good, vals, 0.0).sum(axis=2) / np.maximum(cnt, 1)
    ok = cnt >= MIN_GOOD_YEARS

    ref = np.full((H, W, nd), stack.fill_value)
    rel = np.full((H, W, nd), RI.NODATA, dtype=np.uint8)
    days = np.arange(nd)
    for i, j in zip(*np.nonzero(ok.any(axis=2))):
        q = ok[i, j]
        ref[i, j] = mean[i, j]
        if not q.all():
            ref[i, j, ~q] = np.interp(days[~q], days[q], mean[i, j, q], period=nd)
        rel[i, j] = RI.GOOD
    return Stack(ref, rel, nd=nd, fill_value=stack.fill_value)


def tile_reference(reference: Stack, ny: int) -> Stack:
    """Repeat a one-year reference over ``ny`` years."""
    return Stack(
        np.tile(reference.values, (1, 1, ny)),
        np.tile(reference.reliability, (1, 1, ny)),
        nd=reference.nd,
        fill_value=reference.fill_value,
    )


def simulate_contamination(reference: Stack, reliability: np.ndarray) -> Stack:
    """Apply real reliability codes to a reference curve.

    GOOD keeps the reference value, MARGINAL scales it by 0.95 and CLOUDY or
    NODATA samples are missing. Pixels excluded from the reference come back
    entirely NODATA.
    """
    reliability = np.asarray(reliability, dtype=np.uint8)
    H, W, nd = reference.values.shape
    if reliability.shape[:2] != (H, W) or reliability.shape[2] % nd:
        raise ShapeError(
            f"reliability {reliability.shape} does not fit reference {reference.values.shape}"
        )
    ny = reliability.shape[2] // nd
    ref = np.tile(reference.values, (1, 1, ny))
    values = np.full(ref.shape, reference.fill_value)
    good = reliability == RI.GOOD
    marg = reliability == RI.MARGINAL
    values[good] = ref[good]
    values[marg] = MARGINAL_FACTOR * ref[marg]
    rel = reliability.copy()
    excluded = reference.reliability[:, :, 0] == RI.NODATA
    rel[excluded] = RI.NODATA
    values[excluded] = reference.fill_value
    return Stack(values, rel, nd=nd, fill_value=reference.fill_value)


# -- gap scenarios -------------------------------------------------------------

class ScenarioKind(str, Enum):
    RANDOM = "random"
    BLOCK = "block"


@dataclass(frozen=True)
class ScenarioSpec:
    """Extra gaps to inject. ``block`` is ``(x, y, size, t_start, gap_length)``
    with x the column and y the row of the top-left corner."""

    kind: ScenarioKind
    target_rate: float = 0.0
    block: tuple = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        object.__setattr__(self, "block", tuple(int(b) for b in self.block))
        if self.kind is ScenarioKind.RANDOM and not 0 < self.target_rate < 1:
            raise ParameterError(f"target_rate must lie in (0, 1), got {self.target_rate}")
        if self.kind is ScenarioKind.BLOCK:
            if len(self.block) != 5 or min(self.block[2:]) < 1 or min(self.block[:2]) < 0:
                raise ParameterError(f"block must be (x, y, size, t_start, gap_length), got {self.block}")

    @property
    def label(self) -> str:
        if self.kind is ScenarioKind.RANDOM:
            return f"rate={self.target_rate:g}"
        return f"gap_length={self.block[4]}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        d["block"] = list(self.block)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        return cls(kind=d["kind"], target_rate=d.get("target_rate", 0.0),
                   block=tuple(d.get("block", ())), seed=d.get("seed", 0))


RATE_TOL = 1e-3


def apply_scenario(stack: Stack, spec: ScenarioSpec) -> Stack:
    """Return a copy of ``stack`` with extra CLOUDY samples.

    Newly invalid samples get ``fill_value``; the input keeps the truth.
    Invalid samples are never made valid.
    """
    n = stack.n_real
    rel = stack.reliability.copy()
    values = stack.values.copy()
    om = stack.omega
    om[:, :, n:] = False
    if spec.kind is ScenarioKind.RANDOM:
        total = stack.height * stack.width * n
        current = total - int(om.sum())
        need = math.ceil(spec.target_rate * total - 1e-9) - current
        if need < 0:
            if current / total - spec.target_rate > RATE_TOL:
                raise ParameterError(
                    f"target rate {spec.target_rate:g} is below the current missing "
                    f"rate {current / total:.4f}"
                )
            need = 0
        candidates = np.flatnonzero(om.ravel())
        if need > candidates.size:
            raise ParameterError(f"target rate {spec.target_rate:g} is unreachable")
        rng = np.random.default_rng(spec.seed)
        chosen = np.sort(rng.choice(candidates, size=need, replace=False))
        new_gap = np.zeros(om.size, dtype=bool)
        new_gap[chosen] = True
        new_gap = new_gap.reshape(om.shape)
    else:
        x, y, size, t0, length = spec.block
        if y + size > stack.height or x + size > stack.width or t0 + length > n:
            raise ParameterError(f"block {spec.block} does not fit stack {stack.values.shape}")
        region = np.zeros(om.shape, dtype=bool)
        region[y:y + size, x:x + size, t0:t0 + length] = True
        new_gap = region & om
    rel[new_gap] = RI.CLOUDY
    values[new_gap] = stack.fill_value
    return replace(stack, values=values, reliability=rel)


def gap_mask(before: Stack, after: Stack) -> np.ndarray:
    """Samples valid in ``before`` but not in ``after``."""
    return before.omega & ~after.omega


# -- scoring ---------------------------------------------------------------------

@dataclass
class EvalReport:
    mae_mean: float
    mae_map: np.ndarray
    histogram: np.ndarray
    n_pixels: int = 0
    n_samples: int = 0

    @property
    def fractions(self) -> np.ndarray:
        return self.histogram / max(self.histogram.sum(), 1)

    def to_dict(self) -> dict:
        mae_map = [[None if np.isnan(v) else float(v) for v in row] for row in self.mae_map]
        return {
            "mae_mean": float(self.mae_mean),
            "n_pixels": int(self.n_pixels),
            "n_samples": int(self.n_samples),
            "histogram": {
                "bins": list(MAE_BIN_LABELS),
                "counts": [int(c) for c in self.histogram],
                "fractions": [float(f) for f in self.fractions],
            },
            "mae_map": mae_map,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _as_values(x):
    return x.values if isinstance(x, Stack) else np.asarray(x, dtype=np.float64)


def evaluate_mae(truth, estimate, eval_mask) -> EvalReport:
    """Per-pixel MAE over ``eval_mask``, its mean and a binned histogram."""
    t, e = _as_values(truth), _as_values(estimate)
    mask = np.asarray(eval_mask, dtype=bool)
    if not (t.shape == e.shape == mask.shape):
        raise ShapeError(f"shapes differ: truth {t.shape}, estimate {e.shape}, mask {mask.shape}")
    if not mask.any():
        raise ParameterError("evaluation mask is empty")
    cnt = mask.sum(axis=2)
    err = np.where(mask, np.abs(t - e), 0.0).sum(axis=2)
    mae_map = np.divide(err, cnt, out=np.full(cnt.shape, np.nan), where=cnt > 0)
    scored = mae_map[cnt > 0]
    hist = np.bincount(np.searchsorted(MAE_BIN_EDGES, scored, side="right"),
                       minlength=len(MAE_BIN_LABELS))
    return EvalReport(float(scored.mean()), mae_map, hist, int(scored.size), int(mask.sum()))


def whole_series_mask(truth: Stack, estimate: Stack) -> np.ndarray:
    """All samples where the truth is defined and the estimate is not NODATA."""
    return truth.omega & (estimate.reliability != RI.NODATA)


def reference_experiment(stack: Stack, params: PipelineParams = PipelineParams(),
                         method: Method = Method.TENSOR, gaps_only: bool = False):
    """Reference-curve protocol: build references from ``stack``, contaminate
    them with its reliability codes, reconstruct, score against the reference.
    """
    ref = build_reference(stack)
    cont = simulate_contamination(ref, stack.reliability)
    est = reconstruct_scene(cont, params, method)
    truth = tile_reference(ref, stack.ny)
    mask = whole_series_mask(truth, est)
    if gaps_only:
        mask &= ~cont.omega
    return evaluate_mae(truth, est, mask), est


# -- sweeps ----------------------------------------------------------------------

@dataclass
class SweepRow:
    setting: str
    method: str
    mae_mean: float
    seconds: float


def run_sweep(base: Stack, sweep, methods, params: PipelineParams = PipelineParams(),
              scenario: ScenarioSpec | None = None, apply_filter: bool = False):
    """Inject each scenario, reconstruct with each method, score the new gaps.

    ``sweep`` items are :class:`ScenarioSpec` objects or integer patch sizes;
    patch-size items reuse the fixed ``scenario``. Scoring uses only the
    simulated-gap positions and, by default, the unfiltered gap-fill so the
    comparison isolates reconstruction skill. Failed settings are reported
    with ``nan`` and the sweep carries on.
    """
    rows = []
    for item in sweep:
        if isinstance(item, ScenarioSpec):
            spec, p, label = item, params, item.label
        else:
            if scenario is None:
                raise ParameterError("patch-size sweeps need a fixed scenario")
            spec, p, label = scenario, replace(params, patch_size=int(item)), f"patch_size={int(item)}"
        damaged = apply_scenario(base, spec)
        mask = gap_mask(base, damaged)
        for method in methods:
            method = Method(method)
            t0 = time.perf_counter()
            try:
                if apply_filter:
                    est = reconstruct_scene(damaged, p, method).values
                else:
                    est, _ = fill_gaps(damaged, p, method)
                mae = evaluate_mae(base.values, est, mask).mae_mean
            except TensorfillError as exc:
                log.warning("setting %s with %s failed: %s", label, method.value, exc)
                mae = float("nan")
            rows.append(SweepRow(label, method.value, mae, time.perf_counter() - t0))
            log.info("%s %s mae=%.5f", label, method.value, mae)
    return rows


def sweep_csv(rows, timing: bool = True) -> str:
    """Render sweep rows as CSV text (``setting,method,mae_mean,seconds``).

    With ``timing=False`` the seconds column is written as 0 so that repeated
    runs produce byte-identical files.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["setting", "method", "mae_mean", "seconds"])
    for r in rows:
        w.writerow([r.setting, r.method, repr(float(r.mae_mean)),
                    f"{r.seconds:.3f}" if timing else "0"])
    return buf.getvalue()


def random_rate_sweep(start=0.25, stop=0.80, step=0.05, seed=0):
    n = int(round((stop - start) / step)) + 1
    return [ScenarioSpec(ScenarioKind.RANDOM, target_rate=round(start + k * step, 10), seed=seed)
            for k in range(n)]


def block_sweep(stack: Stack, lengths, size=None, x=None, y=None, t_start=None,
                seed=0, align=8):
    """Gap-length sweep over a fixed square block.

    By default the block sits near the centre with its corner snapped to a
    multiple of ``align`` (the tile size), so whole tiles fall inside it.
    """
    if size is None:
        size = min(12, min(stack.height, stack.width) // 2)
    if x is None:
        x = (stack.width - size) // 2 // align * align
    if y is None:
        y = (stack.height - size) // 2 // align * align
    if t_start is None:
        # start mid-record, a little before the middle of a year
        t_start = (stack.ny // 2) * stack.nd + stack.nd // 4
    return [ScenarioSpec(ScenarioKind.BLOCK, block=(x, y, size, t_start, L), seed=seed)
            for L in lengths]
