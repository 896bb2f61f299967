"""Acceptance gate: the ten structural and shape criteria.

Each test prints one ``PASS``/``FAIL`` line and the lines are repeated in the
pytest terminal summary. The scene-level criteria (5, 6, 7, 10) share one
seeded 64x64 scene with 18 years of 23 composites per year.
"""
from __future__ import annotations

import csv
import io
import time

import numpy as np
import pytest

from tensorfill.cli import main as cli_main
from tensorfill.completion import WeightVector, complete, update_weights
from tensorfill.evaluation import block_sweep, run_sweep
from tensorfill.grid import RI, Patch, RearrangedTensor, fold, inverse_rearrange, pad_stack, rearrange, unfold
from tensorfill.io import read_stack, write_stack
from tensorfill.pipeline import PipelineParams, reconstruct_scene
from tensorfill.synthetic import SynthConfig, synthesize
from tensorfill.trend import FilterParams, l1_trend_filter, l1_trend_filter_batch, lift_passes, optimality_residual

RESULTS: list[str] = []
SCENE = SynthConfig(height=64, width=64, years=18, nd=23, seed=0)
CODES = np.array([0, 1, 3, 255], np.uint8)


def report(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("scene")
    write_stack(synthesize(SCENE).stack, d / "stack")
    return d


def _read_csv(text):
    return {(r["setting"], r["method"]): float(r["mae_mean"]) for r in csv.DictReader(io.StringIO(text))}


@pytest.fixture(scope="module")
def rate_sweep(scene_dir):
    out, secs = [], []
    for k in range(2):
        path = scene_dir / f"rates{k}.csv"
        t0 = time.perf_counter()
        rc = cli_main(["sweep", str(scene_dir / "stack"), "--rates", "25:80:5",
                       "--methods", "tensor,linear", "--seed", "0", "--out", str(path), "--no-timing"])
        secs.append(time.perf_counter() - t0)
        assert rc == 0
        out.append(path.read_bytes())
    return out, secs


@pytest.fixture(scope="module")
def block_rows(scene_dir):
    stack = read_stack(scene_dir / "stack")
    rows = run_sweep(stack, block_sweep(stack, range(2, 13)), ["tensor", "linear"])
    rows += run_sweep(stack, block_sweep(stack, range(8, 13)), ["tensor_original"])
    return {(r.setting, r.method): r.mae_mean for r in rows}


def test_c01_round_trips(tmp_path):
    rng = np.random.default_rng(1)
    bad = 0
    for trial in range(200):
        shape = tuple(int(s) for s in rng.integers(1, 9, 3))
        X = rng.normal(size=shape)
        for mode in (1, 2, 3):
            bad += not np.array_equal(fold(unfold(X, mode), mode, shape), X)

        h, w, nd, ny = (int(v) for v in rng.integers(1, 7, 4))
        p = Patch(rng.normal(size=(h, w, nd * ny)), rng.random((h, w, nd * ny)) > 0.3)
        back = inverse_rearrange(rearrange(p, nd), (h, w))
        bad += not (np.array_equal(back.data, p.data) and np.array_equal(back.omega, p.omega))

        T = int(rng.integers(1, 50))
        vals = rng.normal(size=(h, w, T)).astype(np.float32).astype(np.float64)
        s = pad_stack(vals, rng.choice(CODES, size=(h, w, T)), nd=int(rng.integers(1, 24)))
        write_stack(s, tmp_path / str(trial))
        r = read_stack(tmp_path / str(trial))
        bad += not (r.values.tobytes() == s.values.tobytes()
                    and r.reliability.tobytes() == s.reliability.tobytes() and r.pad == s.pad)
    report(1, bad == 0, f"200 randomized shapes, {bad} inexact round-trips")


def test_c02_weight_rule():
    rng = np.random.default_rng(2)
    # rank-1 (2, 4, 4): one singular value per mode, so k_norm = (1/2, 1/4, 1/4)
    X = np.einsum("i,j,k->ijk", *(rng.uniform(0.5, 1.5, n) for n in (2, 4, 4)))
    w = update_weights(X, 0.85)
    exact = np.allclose(w.w, (0.2, 0.4, 0.4), atol=1e-12)
    direct = np.allclose(WeightVector.from_k_norm((0.5, 0.25, 0.25)).w, (0.2, 0.4, 0.4), atol=1e-12)
    worst = 0.0
    for _ in range(1000):
        shape = tuple(int(s) for s in rng.integers(1, 12, 3))
        r = int(rng.integers(1, 4))
        Y = sum(np.einsum("i,j,k->ijk", *(rng.normal(size=n) for n in shape)) for _ in range(r))
        Y = Y + rng.uniform(0, 1) * rng.normal(size=shape) ** 3
        worst = max(worst, abs(sum(update_weights(Y, 0.85)) - 1.0))
    report(2, exact and direct and worst <= 1e-12,
           f"w={tuple(round(v, 12) for v in w)}, max |sum-1| over 1000 spectra = {worst:.1e}")


def test_c03_exact_recovery():
    rng = np.random.default_rng(3)
    X = np.einsum("i,j,k->ijk", *(rng.uniform(0.5, 1.5, n) for n in (16, 23, 10)))
    om = np.zeros(X.size, bool)
    om[rng.permutation(X.size)[: int(round(0.7 * X.size))]] = True
    om = om.reshape(X.shape)
    t0 = time.perf_counter()
    out, _, it = complete(RearrangedTensor(np.where(om, X, 0.0), om))
    secs = time.perf_counter() - t0
    err = np.linalg.norm(out.data - X) / np.linalg.norm(X)
    report(3, err < 1e-2 and secs < 10, f"relative error {err:.2e} in {secs:.2f} s ({it} iterations)")


def test_c04_filter_certificates():
    rng = np.random.default_rng(4)
    y = rng.normal(size=60)
    ident = np.array_equal(l1_trend_filter(y, FilterParams(lam=0.0)), y)

    dev = 0.0
    for lam in (0.1, 1.0, 100.0):
        for _ in range(5):
            a = rng.uniform(-1, 1) + rng.uniform(-0.05, 0.05) * np.arange(int(rng.integers(3, 80)))
            dev = max(dev, np.max(np.abs(l1_trend_filter(a, FilterParams(lam=lam)) - a)))

    t = np.arange(92.0)
    yb = 0.4 + 0.3 * np.sin(2 * np.pi * t / 23) + rng.normal(0, 0.05, t.size)
    A = np.column_stack([np.ones_like(t), t])
    ls = A @ np.linalg.lstsq(A, yb, rcond=None)[0]
    big = np.max(np.abs(l1_trend_filter(yb, FilterParams(lam=1e6)) - ls))

    res = 0.0
    for _ in range(100):
        n = int(rng.integers(5, 120))
        lam = float(10 ** rng.uniform(-2, 2))
        s = rng.normal(size=n).cumsum() * rng.uniform(0.01, 1)
        res = max(res, optimality_residual(s, l1_trend_filter(s, FilterParams(lam=lam)), lam))

    ok = ident and dev < 1e-6 and big < 1e-4 and res < 1e-4
    report(4, ok, f"identity={ident}, affine dev {dev:.1e}, lam=1e6 vs LS {big:.1e}, "
                  f"max residual {res:.1e}")


def test_c05_random_gap_shape(rate_sweep):
    (text, _), (secs, _) = rate_sweep
    mae = _read_csv(text.decode())
    rates = [f"rate={r / 100:g}" for r in range(25, 81, 5)]
    tens = [mae[(r, "tensor")] for r in rates]
    lin = [mae[(r, "linear")] for r in rates]
    below = all(a < b for a, b in zip(tens, lin))
    growth_t, growth_l = tens[-1] / tens[0], lin[-1] / lin[0]
    ok = below and growth_l > growth_t and secs < 1800
    report(5, ok, f"tensor<linear at {sum(a < b for a, b in zip(tens, lin))}/12 rates, "
                  f"80%/25% growth linear {growth_l:.2f} vs tensor {growth_t:.2f}, sweep {secs:.0f} s")


def test_c06_block_gap(block_rows):
    t = block_rows[("gap_length=12", "tensor")]
    lin = block_rows[("gap_length=12", "linear")]
    report(6, lin >= 2 * t, f"length 12: linear {lin:.4f} vs tensor {t:.4f} (ratio {lin / t:.2f})")


def test_c07_rearrangement_ablation(block_rows):
    ratios = {L: block_rows[(f"gap_length={L}", "tensor_original")] / block_rows[(f"gap_length={L}", "tensor")]
              for L in range(8, 13)}
    worst = min(ratios.values())
    report(7, worst >= 2, "original/rearranged MAE ratio at lengths 8-12: "
                          + ", ".join(f"{r:.2f}" for r in ratios.values()))


def test_c08_lifting_passes():
    rng = np.random.default_rng(8)
    n, T = 1000, 46
    t = np.arange(T)
    Y = (0.45 + 0.3 * np.sin(2 * np.pi * t / 23 + rng.uniform(0, 6, (n, 1)))
         + rng.normal(0, 0.03, (n, T)))
    noisy = rng.random((n, T)) < 0.3
    Y[noisy] -= rng.uniform(0, 0.3, noisy.sum())
    lams = 10 ** rng.uniform(-2, 1, n)
    good_changed = noisy_dropped = 0
    for lam in np.unique(np.round(lams, 1)):
        rows = np.round(lams, 1) == lam
        out = lift_passes(Y[rows], noisy[rows], FilterParams(lam=float(lam)))
        g, nz = ~noisy[rows], noisy[rows]
        good_changed += int((out[g].view(np.uint64) != Y[rows][g].view(np.uint64)).sum())
        noisy_dropped += int((out[nz] < Y[rows][nz]).sum())
    report(8, good_changed == 0 and noisy_dropped == 0,
           f"1000 series: {good_changed} GOOD samples changed, {noisy_dropped} NOISY samples lowered")


def test_c09_gap_free():
    rng = np.random.default_rng(9)
    holes = 0
    for trial in range(6):
        h, w = (int(v) for v in rng.integers(3, 14, 2))
        T = int(rng.integers(23, 80))
        vals = rng.uniform(0.1, 0.9, (h, w, T))
        rel = rng.choice(CODES, size=(h, w, T), p=[0.2, 0.1, 0.5, 0.2])
        # every pixel keeps at least one valid sample; some keep exactly one
        rel[rng.random((h, w)) < 0.3] = RI.CLOUDY
        lack = ~(rel <= RI.MARGINAL).any(axis=2)
        rel[lack, rng.integers(T, size=(h, w))[lack]] = RI.GOOD
        stack = pad_stack(vals, rel, nd=23)
        out = reconstruct_scene(stack, PipelineParams(patch_size=int(rng.integers(2, 9))))
        real = slice(0, stack.n_real)
        holes += int((out.reliability[:, :, real] != RI.GOOD).sum())
        holes += int((~np.isfinite(out.values[:, :, real])).sum())
    report(9, holes == 0, f"6 random stacks, {holes} missing outputs")


def test_c10_determinism(rate_sweep):
    (a, b), _ = rate_sweep
    report(10, a == b, f"two seeded sweep runs, {len(a)} bytes each, identical={a == b}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
