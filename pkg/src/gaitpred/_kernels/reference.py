"""Pure-numpy kernels for the recurrent and convolution inner loops.

These are the semantic ground truth; the compiled core in _core.pyx must
match them (the test suite asserts agreement). All arrays are float64.

Shape conventions:
    X   (B, T, D)   input sequences
    H   (B, T, U)   hidden sequences
    Wx  (D, U) rnn / (D, 4U) lstm   input weights
    Wh  (U, U) rnn / (U, 4U) lstm   recurrent weights
    b   (U,) rnn / (4U,) lstm       biases; lstm gate order is i, f, g, o

`rmask` is an optional (B, U) multiplier on the previous hidden state
(constant across time), used for recurrent dropout. The compiled core does
not implement masks; layers route masked calls here.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def rnn_forward(X, Wx, Wh, b, h0, rmask=None):
    B, T, _ = X.shape
    U = Wh.shape[0]
    H = np.empty((B, T, U))
    h = h0
    for t in range(T):
        hin = h if rmask is None else h * rmask
        h = np.tanh(X[:, t] @ Wx + hin @ Wh + b)
        H[:, t] = h
    return H


def rnn_backward(X, Wx, Wh, H, h0, dH, rmask=None):
    B, T, D = X.shape
    U = Wh.shape[0]
    dX = np.empty((B, T, D))
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros(U)
    carry = np.zeros((B, U))
    for t in range(T - 1, -1, -1):
        h = H[:, t]
        hprev = H[:, t - 1] if t > 0 else h0
        hin = hprev if rmask is None else hprev * rmask
        dpre = (dH[:, t] + carry) * (1.0 - h * h)
        dWx += X[:, t].T @ dpre
        dWh += hin.T @ dpre
        db += dpre.sum(axis=0)
        dX[:, t] = dpre @ Wx.T
        carry = dpre @ Wh.T
        if rmask is not None:
            carry = carry * rmask
    return dX, dWx, dWh, db, carry


def lstm_forward(X, Wx, Wh, b, h0, c0, rmask=None):
    B, T, _ = X.shape
    U = Wh.shape[0]
    H = np.empty((B, T, U))
    C = np.empty((B, T, U))
    G = np.empty((B, T, 4 * U))
    h, c = h0, c0
    for t in range(T):
        hin = h if rmask is None else h * rmask
        a = X[:, t] @ Wx + hin @ Wh + b
        i = 1.0 / (1.0 + np.exp(-a[:, :U]))
        f = 1.0 / (1.0 + np.exp(-a[:, U:2 * U]))
        g = np.tanh(a[:, 2 * U:3 * U])
        o = 1.0 / (1.0 + np.exp(-a[:, 3 * U:]))
        c = f * c + i * g
        h = o * np.tanh(c)
        H[:, t] = h
        C[:, t] = c
        G[:, t, :U] = i
        G[:, t, U:2 * U] = f
        G[:, t, 2 * U:3 * U] = g
        G[:, t, 3 * U:] = o
    return H, C, G


def lstm_backward(X, Wx, Wh, H, C, G, h0, c0, dH, rmask=None):
    B, T, D = X.shape
    U = Wh.shape[0]
    dX = np.empty((B, T, D))
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros(4 * U)
    dh_carry = np.zeros((B, U))
    dc_carry = np.zeros((B, U))
    da = np.empty((B, 4 * U))
    for t in range(T - 1, -1, -1):
        i = G[:, t, :U]
        f = G[:, t, U:2 * U]
        g = G[:, t, 2 * U:3 * U]
        o = G[:, t, 3 * U:]
        c = C[:, t]
        cprev = C[:, t - 1] if t > 0 else c0
        hprev = H[:, t - 1] if t > 0 else h0
        hin = hprev if rmask is None else hprev * rmask

        dh = dH[:, t] + dh_carry
        tc = np.tanh(c)
        dc = dc_carry + dh * o * (1.0 - tc * tc)
        da[:, :U] = dc * g * i * (1.0 - i)
        da[:, U:2 * U] = dc * cprev * f * (1.0 - f)
        da[:, 2 * U:3 * U] = dc * i * (1.0 - g * g)
        da[:, 3 * U:] = dh * tc * o * (1.0 - o)
        dc_carry = dc * f

        dWx += X[:, t].T @ da
        dWh += hin.T @ da
        db += da.sum(axis=0)
        dX[:, t] = da @ Wx.T
        dh_carry = da @ Wh.T
        if rmask is not None:
            dh_carry = dh_carry * rmask
    return dX, dWx, dWh, db, dh_carry, dc_carry


def conv1d_forward(X, K, b, relu=True):
    """Valid 1-D convolution over time: X (B, L, C) with K (F, k, C) ->
    (B, L-k+1, F). Returns (activated output, pre-activation cache)."""
    k = K.shape[1]
    win = sliding_window_view(X, k, axis=1)  # (B, L-k+1, C, k)
    pre = np.einsum("btcj,fjc->btf", win, K, optimize=True) + b
    out = np.maximum(pre, 0.0) if relu else pre
    return out, pre


def conv1d_backward(X, K, pre, relu, dY):
    F, k, C = K.shape
    dpre = dY * (pre > 0.0) if relu else dY
    Lout = dpre.shape[1]
    dK = np.empty_like(K)
    dX = np.zeros_like(X)
    for j in range(k):
        xs = X[:, j:j + Lout, :]
        dK[:, j, :] = np.einsum("btf,btc->fc", dpre, xs, optimize=True)
        dX[:, j:j + Lout, :] += dpre @ K[:, j, :]
    db = dpre.sum(axis=(0, 1))
    return dX, dK, db
