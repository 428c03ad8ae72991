"""Numerical primitives: value oracles and finite-difference audits."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erf

from dapt import rng as rngmod
from dapt.nn import (dropout_bwd, dropout_fwd, finite_difference, gelu_bwd,
                     gelu_fwd, layernorm_bwd, layernorm_fwd, linear_bwd,
                     linear_fwd, log_softmax, masked_softmax_fwd,
                     max_relative_error, softmax_bwd)


def _fd_scalar(f, x, i, step=1e-6):
    flat = x.reshape(-1)
    orig = flat[i]
    flat[i] = orig + step
    up = f()
    flat[i] = orig - step
    down = f()
    flat[i] = orig
    return (up - down) / (2 * step)


# ----------------------------------------------------------------------
# gelu
# ----------------------------------------------------------------------

def test_gelu_matches_gaussian_cdf_form():
    x = np.linspace(-4, 4, 41)
    y, _ = gelu_fwd(x)
    expected = x * 0.5 * (1 + erf(x / np.sqrt(2)))
    np.testing.assert_allclose(y, expected, rtol=0, atol=1e-12)


def test_gelu_known_values():
    y, _ = gelu_fwd(np.array([0.0, 1.0, -1.0]))
    np.testing.assert_allclose(y[0], 0.0, atol=0)
    np.testing.assert_allclose(y[1], 0.8413447460685429, atol=1e-12)
    np.testing.assert_allclose(y[2], -0.15865525393145707, atol=1e-12)


def test_gelu_gradient_matches_fd():
    x = rngmod.stream(0, 0).normal(size=12)
    _, cache = gelu_fwd(x)
    dy = rngmod.stream(0, 1).normal(size=12)
    dx = gelu_bwd(dy, cache)
    for i in range(12):
        fd = _fd_scalar(lambda: float((gelu_fwd(x)[0] * dy).sum()), x, i)
        assert abs(dx[i] - fd) < 1e-7


def test_gelu_preserves_dtype():
    y32, _ = gelu_fwd(np.ones(3, dtype=np.float32))
    assert y32.dtype == np.float32


# ----------------------------------------------------------------------
# linear / layernorm
# ----------------------------------------------------------------------

def test_linear_forward_oracle():
    x = np.array([[1.0, 2.0]])
    w = np.array([[1.0, 0.0, 2.0], [0.0, 3.0, 1.0]])
    b = np.array([10.0, 20.0, 30.0])
    y, _ = linear_fwd(x, w, b)
    np.testing.assert_array_equal(y, [[11.0, 26.0, 34.0]])


def test_linear_gradients_match_fd():
    r = rngmod.stream(1, 0)
    x = r.normal(size=(3, 4))
    w = r.normal(size=(4, 5))
    b = r.normal(size=5)
    dy = r.normal(size=(3, 5))
    y, cache = linear_fwd(x, w, b)
    dx, dw, db = linear_bwd(dy, cache)

    def loss():
        return float((linear_fwd(x, w, b)[0] * dy).sum())

    for arr, grad in ((x, dx), (w, dw), (b, db)):
        for i in range(arr.size):
            assert abs(grad.reshape(-1)[i] - _fd_scalar(loss, arr, i)) < 1e-6


def test_layernorm_normalizes_last_axis():
    r = rngmod.stream(2, 0)
    x = r.normal(size=(4, 6)) * 3 + 5
    g = np.ones(6)
    b = np.zeros(6)
    y, _ = layernorm_fwd(x, g, b)
    np.testing.assert_allclose(y.mean(axis=-1), 0, atol=1e-12)
    np.testing.assert_allclose(y.std(axis=-1), 1, atol=1e-5)  # eps shifts variance


def test_layernorm_gradients_match_fd():
    r = rngmod.stream(2, 1)
    x = r.normal(size=(2, 5))
    g = r.normal(size=5)
    b = r.normal(size=5)
    dy = r.normal(size=(2, 5))
    _, cache = layernorm_fwd(x, g, b)
    dx, dg, db = layernorm_bwd(dy, cache)

    def loss():
        return float((layernorm_fwd(x, g, b)[0] * dy).sum())

    for arr, grad in ((x, dx), (g, dg), (b, db)):
        for i in range(arr.size):
            assert abs(grad.reshape(-1)[i] - _fd_scalar(loss, arr, i)) < 1e-6


# ----------------------------------------------------------------------
# dropout
# ----------------------------------------------------------------------

def test_dropout_inactive_paths_are_identity():
    x = rngmod.stream(3, 0).normal(size=(4, 8))
    y, cache = dropout_fwd(x, 0.5, train=False, rng=None)
    assert np.array_equal(y, x) and cache is None
    y, cache = dropout_fwd(x, 0.0, train=True, rng=rngmod.stream(3, 1))
    assert np.array_equal(y, x) and cache is None
    dy = np.ones_like(x)
    assert np.array_equal(dropout_bwd(dy, None), dy)


def test_dropout_zeroes_and_rescales():
    x = np.ones((100, 100), dtype=np.float32)
    y, cache = dropout_fwd(x, 0.25, train=True, rng=rngmod.stream(3, 2))
    kept = y != 0
    assert 0.70 < kept.mean() < 0.80
    np.testing.assert_allclose(y[kept], 1.0 / 0.75, rtol=1e-6)
    dy = np.ones_like(x)
    dx = dropout_bwd(dy, cache)
    assert np.array_equal(dx != 0, kept)


def test_dropout_requires_rng_in_train_mode():
    with pytest.raises(ValueError):
        dropout_fwd(np.ones(3), 0.5, train=True, rng=None)


# ----------------------------------------------------------------------
# softmax family
# ----------------------------------------------------------------------

def test_masked_softmax_rows_sum_to_one_and_respect_mask():
    r = rngmod.stream(4, 0)
    x = r.normal(size=(3, 5))
    mask = np.array([[1, 1, 0, 1, 0],
                     [1, 1, 1, 1, 1],
                     [0, 1, 0, 0, 0]], dtype=bool)
    p, _ = masked_softmax_fwd(x, mask)
    np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-12)
    assert (p[~mask] == 0).all()


def test_masked_softmax_all_masked_row_is_zero():
    x = np.zeros((2, 4))
    mask = np.array([[1, 1, 1, 1], [0, 0, 0, 0]], dtype=bool)
    p, _ = masked_softmax_fwd(x, mask)
    assert (p[1] == 0).all()
    np.testing.assert_allclose(p[0].sum(), 1.0)


def test_masked_softmax_gradient_matches_fd():
    r = rngmod.stream(4, 1)
    x = r.normal(size=(2, 4))
    mask = np.array([[1, 0, 1, 1], [1, 1, 1, 0]], dtype=bool)
    dy = r.normal(size=(2, 4))
    p, cache = masked_softmax_fwd(x, mask)
    dx = softmax_bwd(dy, cache)

    def loss():
        return float((masked_softmax_fwd(x, mask)[0] * dy).sum())

    for i in range(x.size):
        assert abs(dx.reshape(-1)[i] - _fd_scalar(loss, x, i)) < 1e-6


def test_log_softmax_matches_naive_and_is_stable():
    x = np.array([[1.0, 2.0, 3.0]])
    naive = np.log(np.exp(x) / np.exp(x).sum())
    np.testing.assert_allclose(log_softmax(x), naive, atol=1e-12)
    big = np.array([[1000.0, 1001.0]])
    lp = log_softmax(big)
    assert np.isfinite(lp).all()
    np.testing.assert_allclose(np.exp(lp).sum(), 1.0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(2, 6), st.integers(0, 2 ** 32 - 1))
def test_log_softmax_rows_normalize(rows, cols, seed):
    x = rngmod.stream(seed, 0).normal(size=(rows, cols)) * 10
    lp = log_softmax(x)
    np.testing.assert_allclose(np.exp(lp).sum(axis=-1), 1.0, atol=1e-10)


# ----------------------------------------------------------------------
# finite-difference helper
# ----------------------------------------------------------------------

def test_finite_difference_on_quadratic():
    params = {"a": np.array([1.0, 2.0, 3.0]), "b": np.array([[4.0, 5.0]])}

    def f():
        return float((params["a"] ** 2).sum() + 3 * params["b"].sum())

    fd = finite_difference(f, params, step=1e-5)
    analytic = {"a": 2 * params["a"], "b": np.full((1, 2), 3.0)}
    assert max_relative_error(analytic, fd) < 1e-8


def test_max_relative_error_treats_missing_grads_as_zero():
    fd = {"unused": (np.array([0]), np.array([0.0]))}
    assert max_relative_error({}, fd) == 0.0
    fd = {"unused": (np.array([0]), np.array([1.0]))}
    assert max_relative_error({}, fd) == 1.0
