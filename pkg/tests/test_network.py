import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinnfatigue import _kernels
from pinnfatigue.network import (
    SELU_ALPHA,
    SELU_LAMBDA,
    MlpParams,
    NonFiniteError,
    forward,
    init_params,
    input_gradient,
    input_second_diagonal,
    jet,
    param_gradients,
    selu,
    selu_prime,
    selu_second,
)

from conftest import matmul_oracle, random_net, rel_err


def test_selu_values():
    assert selu(0.0) == 0.0
    assert selu(1.0) == pytest.approx(1.05074, abs=1e-12)
    expected = -SELU_LAMBDA * SELU_ALPHA * (1.0 - math.exp(-20.0))
    assert selu(-20.0) == pytest.approx(expected, rel=1e-14)
    assert selu(-20.0) == pytest.approx(-1.75809, abs=1e-4)


@given(st.floats(-30, 30))
def test_selu_derivatives_match_finite_differences(x):
    h = 1e-6
    if abs(x) < 2 * h:
        return
    fd = (selu(x + h) - selu(x - h)) / (2 * h)
    assert selu_prime(x) == pytest.approx(fd, rel=1e-6, abs=1e-9)
    fd2 = (selu_prime(x + h) - selu_prime(x - h)) / (2 * h)
    assert selu_second(x) == pytest.approx(fd2, rel=1e-5, abs=1e-8)


def test_zero_net_outputs_zero():
    p = MlpParams((3, 4, 1), [np.zeros((4, 3)), np.zeros((1, 4))], [np.zeros(4), np.zeros(1)])
    assert np.all(forward(p, np.random.default_rng(0).normal(size=(5, 3))) == 0.0)
    assert np.all(input_gradient(p, np.ones(3)) == 0.0)
    g = param_gradients(p, np.ones((2, 3)), np.zeros(2))
    assert all(np.all(W == 0) for W in g.weights)


def test_single_affine_layer():
    p = MlpParams((2, 1), [np.array([[2.0, 3.0]])], [np.array([1.0])], activation="identity")
    assert forward(p, np.array([1.0, 1.0])) == 6.0


def test_forward_matches_matmul_oracle():
    rng = np.random.default_rng(4)
    for dims in [(3, 5, 1), (6, 8, 4, 1), (12, 16, 12, 8, 1)]:
        p = random_net(rng, dims)
        X = rng.normal(size=(20, dims[0]))
        np.testing.assert_allclose(forward(p, X), matmul_oracle(p, X), rtol=1e-13, atol=1e-13)


def test_param_gradient_single_layer_outer_product():
    p = MlpParams((3, 1), [np.array([[0.5, -1.0, 2.0]])], [np.array([0.1])], activation="identity")
    x = np.array([[1.0, 2.0, 3.0]])
    g = param_gradients(p, x, np.array([1.5]))
    np.testing.assert_array_equal(g.weights[0], 1.5 * x)
    np.testing.assert_array_equal(g.biases[0], [1.5])


def test_linear_net_gradient_is_weight_product():
    rng = np.random.default_rng(1)
    p = random_net(rng, (4, 5, 3, 1), activation="identity")
    v = (p.weights[2] @ p.weights[1] @ p.weights[0]).ravel()
    for x in rng.normal(size=(5, 4)):
        np.testing.assert_allclose(input_gradient(p, x), v, rtol=1e-13)
        for i in range(4):
            assert input_second_diagonal(p, x, i) == pytest.approx(0.0, abs=1e-13)


def test_one_hidden_unit_negative_branch_curvature():
    w1, b, w2 = 1.3, -0.4, -0.7
    p = MlpParams((1, 1, 1), [np.array([[w1]]), np.array([[w2]])], [np.array([b]), np.array([0.0])])
    for x in (-2.0, -0.5, 0.1):
        z = w1 * x + b
        assert z < 0
        expected = w2 * w1 * w1 * SELU_LAMBDA * SELU_ALPHA * math.exp(z)
        assert input_second_diagonal(p, np.array([x]), 0) == pytest.approx(expected, rel=1e-13)


def test_param_gradients_finite_differences():
    rng = np.random.default_rng(7)
    p = random_net(rng, (5, 7, 4, 1))
    X = rng.normal(size=(6, 5))
    gy = rng.normal(size=6)
    g = param_gradients(p, X, gy).to_vector()
    theta = p.to_vector()
    h = 1e-5
    fd = np.empty_like(theta)
    for k in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[k] += h
        tm[k] -= h
        fd[k] = (gy @ forward(p.with_vector(tp), X) - gy @ forward(p.with_vector(tm), X)) / (2 * h)
    assert rel_err(g, fd, floor=1e-6) < 1e-5


def test_jet_columns_agree_with_reverse_gradient():
    rng = np.random.default_rng(2)
    p = random_net(rng, (6, 9, 5, 1))
    X = rng.normal(size=(8, 6))
    out = jet(p, X, [0, 3, 5], second=True)
    np.testing.assert_allclose(out[:, 0], forward(p, X), rtol=1e-13)
    gx = input_gradient(p, X)
    np.testing.assert_allclose(out[:, 1:4], gx[:, [0, 3, 5]], rtol=1e-11, atol=1e-14)
    np.testing.assert_allclose(out[:, 4], input_second_diagonal(p, X, 0), rtol=1e-13)


def test_init_is_deterministic_with_lecun_variance():
    a, b = init_params((4, 3, 1), 5), init_params((4, 3, 1), 5)
    assert np.array_equal(a.to_vector(), b.to_vector())
    assert all(np.all(bb == 0.0) for bb in a.biases)
    samples = np.concatenate([init_params((4, 3, 1), s).weights[0].ravel() for s in range(10_000 // 12 + 1)])
    var = samples.var()
    assert 0.5 * 0.25 <= var <= 2.0 * 0.25


def test_save_load_round_trip(tmp_path):
    p = random_net(np.random.default_rng(3), (3, 4, 1))
    p.schema_hash = "abc"
    p.save(tmp_path / "m.json")
    q = MlpParams.load(tmp_path / "m.json")
    assert np.array_equal(p.to_vector(), q.to_vector())
    assert q.schema_hash == "abc" and q.dims == p.dims


def test_load_rejects_foreign_document(tmp_path):
    (tmp_path / "m.json").write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        MlpParams.load(tmp_path / "m.json")


def test_bad_shapes_rejected():
    with pytest.raises(ValueError):
        MlpParams((2, 3, 1), [np.zeros((3, 2))], [np.zeros(3)])
    with pytest.raises(ValueError):
        forward(init_params((3, 2, 1), 0), np.ones(4))


def test_non_finite_reports_layer():
    p = MlpParams((1, 1, 1), [np.array([[1e308]]), np.array([[1e308]])], [np.zeros(1), np.zeros(1)])
    with pytest.raises(NonFiniteError) as exc:
        forward(p, np.array([10.0]))
    assert exc.value.layer in (0, 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_numba_and_numpy_kernels_agree(seed):
    if not _kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    rng = np.random.default_rng(seed)
    dims = np.array([4, 6, 5, 1])
    p = random_net(rng, tuple(dims))
    X = rng.normal(size=(7, 4))
    cols = np.array([0, 2, 3])
    theta = p.to_vector()
    a = _kernels.forward_jet_numpy(theta, dims, X, cols, True, 0, SELU_LAMBDA, SELU_ALPHA)
    b = _kernels.forward_jet_numba(theta, dims, X, cols, True, 0, SELU_LAMBDA, SELU_ALPHA)
    np.testing.assert_allclose(a[0], b[0], rtol=1e-12, atol=1e-14)
    adj = rng.normal(size=a[0].shape)
    ga = _kernels.backward_jet_numpy(theta, dims, X, cols, True, 0, SELU_LAMBDA, SELU_ALPHA, *a[1:], adj)
    gb = _kernels.backward_jet_numba(theta, dims, X, cols, True, 0, SELU_LAMBDA, SELU_ALPHA, *b[1:], adj)
    np.testing.assert_allclose(ga, gb, rtol=1e-11, atol=1e-13)


def test_env_flag_selects_numpy_backend():
    import os
    import subprocess
    import sys

    env = dict(os.environ, PINNFATIGUE_NUMBA="0")
    out = subprocess.run(
        [sys.executable, "-c", "from pinnfatigue import _kernels; print(_kernels.backend_name())"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"
