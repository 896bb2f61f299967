import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tensorfill.completion import (
    CompletionParams,
    DegenerateSpectrumWarning,
    WeightVector,
    complete,
    complete_patch,
    initial_fill,
    spectral_k,
    svt,
    update_weights,
)
from tensorfill.exceptions import DegenerateSpectrumError, EmptyPatchError, ParameterError
from tensorfill.grid import Patch, RearrangedTensor


def rank1(shape, rng):
    a, b, c = (rng.uniform(0.5, 1.5, n) for n in shape)
    return np.einsum("i,j,k->ijk", a, b, c)


def test_weights_from_rank1_tensor():
    # a rank-1 (2, 4, 4) tensor keeps one singular value per mode: k_norm = (1/2, 1/4, 1/4)
    X = rank1((2, 4, 4), np.random.default_rng(0))
    np.testing.assert_allclose(tuple(update_weights(X, 0.85)), (0.2, 0.4, 0.4), atol=1e-12)


def test_weight_vector_validation():
    with pytest.raises(ParameterError):
        WeightVector((0.5, 0.5, 0.0))
    with pytest.raises(ParameterError):
        WeightVector((0.3, 0.3, 0.3))


@given(st.lists(st.floats(1e-3, 1.0), min_size=3, max_size=3))
def test_from_k_norm_sums_to_one(k):
    w = WeightVector.from_k_norm(k)
    assert abs(sum(w) - 1.0) <= 1e-12
    inv = 1 / np.array(k)
    np.testing.assert_allclose(w.w, inv / inv.sum(), rtol=1e-12)


@pytest.mark.parametrize("sigma,tau,k", [
    ([1.0, 0.0, 0.0], 0.85, 1),
    ([1.0, 1.0], 0.85, 2),
    ([0.85, 0.15], 0.85, 1),
    ([0.8, 0.1, 0.1], 0.85, 2),
    ([1.0, 1.0, 1.0, 1.0], 0.5, 2),
])
def test_spectral_k(sigma, tau, k):
    assert spectral_k(sigma, tau) == k


def test_spectral_k_degenerate():
    with pytest.raises(DegenerateSpectrumError):
        spectral_k([0.0, 0.0], 0.85)


def test_zero_tensor_weights_warn_and_fall_back():
    with pytest.warns(DegenerateSpectrumWarning):
        w = update_weights(np.zeros((3, 4, 5)))
    np.testing.assert_allclose(w.w, (1 / 3, 1 / 3, 1 / 3))


def test_svt_shrinks_singular_values(rng):
    M = rng.normal(size=(6, 9))
    s = np.linalg.svd(M, compute_uv=False)
    out = svt(M, s[2])
    np.testing.assert_allclose(np.linalg.svd(out, compute_uv=False)[:2], s[:2] - s[2], atol=1e-10)
    assert np.linalg.matrix_rank(out, tol=1e-9) == 2
    np.testing.assert_allclose(svt(M, 0.0), M, atol=1e-12)


def test_svt_is_nuclear_prox(rng):
    # the prox output beats random perturbations on 0.5||Z - M||^2 + t||Z||_*
    M, t = rng.normal(size=(5, 7)), 0.8
    Z = svt(M, t)

    def obj(Z):
        return 0.5 * np.sum((Z - M) ** 2) + t * np.linalg.svd(Z, compute_uv=False).sum()

    base = obj(Z)
    for _ in range(50):
        assert obj(Z + 1e-3 * rng.normal(size=Z.shape)) >= base - 1e-12


def test_params_validation():
    for bad in (dict(tau=1.0), dict(tau=0.0), dict(rho=0), dict(max_iters=0), dict(tol=0),
                dict(rho_growth=0.5)):
        with pytest.raises(ParameterError):
            CompletionParams(**bad)


def test_initial_fill_uses_same_day_mean():
    data = np.zeros((1, 2, 3))
    data[0, 0] = [1.0, 2.0, 3.0]
    data[0, 1] = [5.0, 7.0, 9.0]
    om = np.ones_like(data, bool)
    om[0, 0, 1] = False
    om[0, 1, :] = False
    out = initial_fill(RearrangedTensor(data, om)).data
    assert out[0, 0, 1] == 2.0  # mean of days with the same index: (1 + 3) / 2
    assert np.all(out[0, 1] == 2.0)  # whole day missing: pixel mean


def test_initial_fill_empty():
    with pytest.raises(EmptyPatchError):
        initial_fill(RearrangedTensor(np.zeros((2, 2, 2)), np.zeros((2, 2, 2), bool)))


def test_complete_keeps_observed_entries(rng):
    X = rank1((8, 23, 4), rng)
    om = rng.random(X.shape) > 0.4
    out, w, it = complete(RearrangedTensor(np.where(om, X, 0.0), om))
    np.testing.assert_array_equal(out.data[om], X[om])
    np.testing.assert_array_equal(out.omega, om)
    assert abs(sum(w) - 1) <= 1e-12 and it >= 1


def test_complete_recovers_low_rank(rng):
    X = rank1((16, 23, 6), rng)
    om = rng.random(X.shape) > 0.3
    out, _, _ = complete(RearrangedTensor(np.where(om, X, 0.0), om))
    assert np.linalg.norm(out.data - X) / np.linalg.norm(X) < 1e-2


def test_complete_patch_identity_when_full(rng):
    p = Patch(rng.normal(size=(3, 3, 46)), np.ones((3, 3, 46), bool))
    out = complete_patch(p)
    np.testing.assert_array_equal(out.data, p.data)


@pytest.mark.parametrize("rearranged", [True, False])
def test_complete_patch_both_forms(rng, rearranged):
    t = np.arange(46)
    base = 0.5 + 0.3 * np.sin(2 * np.pi * t / 23)
    data = np.broadcast_to(base, (4, 4, 46)) * rng.uniform(0.9, 1.1, (4, 4, 1))
    om = rng.random(data.shape) > 0.3
    out = complete_patch(Patch(np.where(om, data, -1.0), om),
                         CompletionParams(use_rearranged_form=rearranged))
    np.testing.assert_array_equal(out.data[om], data[om])
    assert np.all(np.isfinite(out.data))
    assert np.abs(out.data - data)[~om].mean() < 0.15


def test_complete_patch_empty():
    with pytest.raises(EmptyPatchError):
        complete_patch(Patch(np.zeros((2, 2, 23)), np.zeros((2, 2, 23), bool)))
