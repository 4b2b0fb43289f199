"""Backend agreement: the compiled core must reproduce the numpy reference
kernels to tight numerical tolerance (bit-exactness is not promised:
summation order differs between BLAS matmuls and the C loops)."""

import numpy as np
import pytest

from gaitpred._kernels import BACKEND, reference
from gaitpred.rng import SplitMix64

try:
    from gaitpred._kernels import _core
except ImportError:
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="compiled core not built")


def rand(rng, *shape):
    return rng.normal(int(np.prod(shape))).reshape(shape)


def rnn_inputs(seed, B=3, T=7, D=4, U=5):
    rng = SplitMix64(seed)
    return (rand(rng, B, T, D), rand(rng, D, U) * 0.4, rand(rng, U, U) * 0.4,
            rand(rng, U) * 0.1, rand(rng, B, U) * 0.2)


def lstm_inputs(seed, B=3, T=6, D=4, U=5):
    rng = SplitMix64(seed)
    return (rand(rng, B, T, D), rand(rng, D, 4 * U) * 0.4,
            rand(rng, U, 4 * U) * 0.4, rand(rng, 4 * U) * 0.1,
            rand(rng, B, U) * 0.2, rand(rng, B, U) * 0.2)


@needs_core
@pytest.mark.parametrize("seed", range(5))
def test_rnn_agreement(seed):
    X, Wx, Wh, b, h0 = rnn_inputs(seed)
    H_ref = reference.rnn_forward(X, Wx, Wh, b, h0)
    H_core = _core.rnn_forward(X, Wx, Wh, b, h0)
    np.testing.assert_allclose(H_core, H_ref, rtol=1e-12, atol=1e-14)

    dH = rand(SplitMix64(seed + 100), *H_ref.shape)
    out_ref = reference.rnn_backward(X, Wx, Wh, H_ref, h0, dH)
    out_core = _core.rnn_backward(X, Wx, Wh, H_core, h0, dH)
    for a, b_ in zip(out_core, out_ref):
        np.testing.assert_allclose(a, b_, rtol=1e-10, atol=1e-12)


@needs_core
@pytest.mark.parametrize("seed", range(5))
def test_lstm_agreement(seed):
    X, Wx, Wh, b, h0, c0 = lstm_inputs(seed)
    ref = reference.lstm_forward(X, Wx, Wh, b, h0, c0)
    core = _core.lstm_forward(X, Wx, Wh, b, h0, c0)
    for a, b_ in zip(core, ref):
        np.testing.assert_allclose(a, b_, rtol=1e-12, atol=1e-14)

    H, C, G = ref
    dH = rand(SplitMix64(seed + 100), *H.shape)
    out_ref = reference.lstm_backward(X, Wx, Wh, H, C, G, h0, c0, dH)
    out_core = _core.lstm_backward(X, Wx, Wh, core[0], core[1], core[2],
                                   h0, c0, dH)
    for a, b_ in zip(out_core, out_ref):
        np.testing.assert_allclose(a, b_, rtol=1e-10, atol=1e-12)


@needs_core
@pytest.mark.parametrize("seed,relu", [(0, True), (1, True), (2, False)])
def test_conv_agreement(seed, relu):
    rng = SplitMix64(seed)
    X = rand(rng, 3, 9, 6)
    K = rand(rng, 4, 3, 6) * 0.5
    b = rand(rng, 4) * 0.1
    Y_ref, pre_ref = reference.conv1d_forward(X, K, b, relu)
    Y_core, pre_core = _core.conv1d_forward(X, K, b, relu)
    np.testing.assert_allclose(Y_core, Y_ref, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(pre_core, pre_ref, rtol=1e-12, atol=1e-14)

    dY = rand(SplitMix64(seed + 50), *Y_ref.shape)
    out_ref = reference.conv1d_backward(X, K, pre_ref, relu, dY)
    out_core = _core.conv1d_backward(X, K, pre_core, relu, dY)
    for a, b_ in zip(out_core, out_ref):
        np.testing.assert_allclose(a, b_, rtol=1e-10, atol=1e-12)


def test_backend_name_valid():
    assert BACKEND in ("compiled", "reference")


# Zero-parameter / limit fixed points (hold on whichever backend is active)


def test_rnn_zero_params_zero_output():
    from gaitpred import _kernels as K

    X = SplitMix64(1).normal(2 * 5 * 3).reshape(2, 5, 3)
    H = K.rnn_forward(X, np.zeros((3, 4)), np.zeros((4, 4)), np.zeros(4),
                      np.zeros((2, 4)))
    np.testing.assert_array_equal(H, np.zeros((2, 5, 4)))


def test_lstm_zero_params_gates_half_states_zero():
    from gaitpred import _kernels as K

    X = SplitMix64(2).normal(1 * 4 * 3).reshape(1, 4, 3)
    H, C, G = K.lstm_forward(X, np.zeros((3, 16)), np.zeros((4, 16)),
                             np.zeros(16), np.zeros((1, 4)), np.zeros((1, 4)))
    U = 4
    np.testing.assert_array_equal(H, np.zeros_like(H))
    np.testing.assert_array_equal(C, np.zeros_like(C))
    np.testing.assert_allclose(G[:, :, :2 * U], np.full((1, 4, 2 * U), 0.5))
    np.testing.assert_allclose(G[:, :, 2 * U:3 * U], np.zeros((1, 4, U)))
    np.testing.assert_allclose(G[:, :, 3 * U:], np.full((1, 4, U), 0.5))


def test_lstm_saturated_forget_gate_preserves_cell():
    # forget bias -> +inf limit with all other parameters zero: cell state
    # is carried through unchanged (checked at bias 20)
    from gaitpred import _kernels as K

    U, T = 4, 5
    b = np.zeros(4 * U)
    b[U:2 * U] = 20.0
    X = SplitMix64(3).normal(1 * T * 3).reshape(1, T, 3)
    c0 = SplitMix64(4).uniform(U).reshape(1, U)
    H, C, G = K.lstm_forward(X, np.zeros((3, 4 * U)), np.zeros((U, 4 * U)),
                             b, np.zeros((1, U)), c0)
    np.testing.assert_allclose(C[:, -1], c0, atol=1e-8)
