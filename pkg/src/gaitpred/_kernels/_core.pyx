# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for the recurrent and convolution inner loops.

Semantics match _kernels/reference.py (the test suite asserts agreement);
see that module for the shape conventions. These loops exist because the
per-step matrices are tiny (hidden width ~20), where per-call numpy
overhead dominates.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()


cdef inline double _sigmoid(double x) noexcept nogil:
    return 1.0 / (1.0 + exp(-x))


def rnn_forward(double[:, :, ::1] X, double[:, ::1] Wx, double[:, ::1] Wh,
                double[::1] b, double[:, ::1] h0):
    cdef Py_ssize_t B = X.shape[0], T = X.shape[1], D = X.shape[2]
    cdef Py_ssize_t U = Wh.shape[0]
    H_arr = np.empty((B, T, U))
    cdef double[:, :, ::1] H = H_arr
    cdef Py_ssize_t n, t, u, j
    cdef double acc
    with nogil:
        for n in range(B):
            for t in range(T):
                for u in range(U):
                    acc = b[u]
                    for j in range(D):
                        acc += X[n, t, j] * Wx[j, u]
                    if t == 0:
                        for j in range(U):
                            acc += h0[n, j] * Wh[j, u]
                    else:
                        for j in range(U):
                            acc += H[n, t - 1, j] * Wh[j, u]
                    H[n, t, u] = tanh(acc)
    return H_arr


def rnn_backward(double[:, :, ::1] X, double[:, ::1] Wx, double[:, ::1] Wh,
                 double[:, :, ::1] H, double[:, ::1] h0,
                 double[:, :, ::1] dH):
    cdef Py_ssize_t B = X.shape[0], T = X.shape[1], D = X.shape[2]
    cdef Py_ssize_t U = Wh.shape[0]
    dX_arr = np.empty((B, T, D))
    dWx_arr = np.zeros((D, U))
    dWh_arr = np.zeros((U, U))
    db_arr = np.zeros(U)
    dh0_arr = np.zeros((B, U))
    cdef double[:, :, ::1] dX = dX_arr
    cdef double[:, ::1] dWx = dWx_arr
    cdef double[:, ::1] dWh = dWh_arr
    cdef double[::1] db = db_arr
    cdef double[:, ::1] dh0 = dh0_arr
    carry_arr = np.zeros((B, U))
    pre_arr = np.zeros((B, U))
    cdef double[:, ::1] carry = carry_arr
    cdef double[:, ::1] dpre = pre_arr
    cdef Py_ssize_t n, t, u, j
    cdef double h, acc
    with nogil:
        for t in range(T - 1, -1, -1):
            for n in range(B):
                for u in range(U):
                    h = H[n, t, u]
                    dpre[n, u] = (dH[n, t, u] + carry[n, u]) * (1.0 - h * h)
            for n in range(B):
                for u in range(U):
                    acc = dpre[n, u]
                    db[u] += acc
                    for j in range(D):
                        dWx[j, u] += X[n, t, j] * acc
                    if t == 0:
                        for j in range(U):
                            dWh[j, u] += h0[n, j] * acc
                    else:
                        for j in range(U):
                            dWh[j, u] += H[n, t - 1, j] * acc
                for j in range(D):
                    acc = 0.0
                    for u in range(U):
                        acc += dpre[n, u] * Wx[j, u]
                    dX[n, t, j] = acc
                for j in range(U):
                    acc = 0.0
                    for u in range(U):
                        acc += dpre[n, u] * Wh[j, u]
                    carry[n, j] = acc
        for n in range(B):
            for j in range(U):
                dh0[n, j] = carry[n, j]
    return dX_arr, dWx_arr, dWh_arr, db_arr, dh0_arr


def lstm_forward(double[:, :, ::1] X, double[:, ::1] Wx, double[:, ::1] Wh,
                 double[::1] b, double[:, ::1] h0, double[:, ::1] c0):
    cdef Py_ssize_t B = X.shape[0], T = X.shape[1], D = X.shape[2]
    cdef Py_ssize_t U = Wh.shape[0]
    H_arr = np.empty((B, T, U))
    C_arr = np.empty((B, T, U))
    G_arr = np.empty((B, T, 4 * U))
    a_arr = np.empty(4 * U)
    cdef double[:, :, ::1] H = H_arr
    cdef double[:, :, ::1] C = C_arr
    cdef double[:, :, ::1] G = G_arr
    cdef double[::1] a = a_arr
    cdef Py_ssize_t n, t, u, j, q
    cdef double acc, i_g, f_g, g_g, o_g, c
    with nogil:
        for n in range(B):
            for t in range(T):
                for q in range(4 * U):
                    acc = b[q]
                    for j in range(D):
                        acc += X[n, t, j] * Wx[j, q]
                    if t == 0:
                        for j in range(U):
                            acc += h0[n, j] * Wh[j, q]
                    else:
                        for j in range(U):
                            acc += H[n, t - 1, j] * Wh[j, q]
                    a[q] = acc
                for u in range(U):
                    i_g = _sigmoid(a[u])
                    f_g = _sigmoid(a[U + u])
                    g_g = tanh(a[2 * U + u])
                    o_g = _sigmoid(a[3 * U + u])
                    if t == 0:
                        c = f_g * c0[n, u] + i_g * g_g
                    else:
                        c = f_g * C[n, t - 1, u] + i_g * g_g
                    C[n, t, u] = c
                    H[n, t, u] = o_g * tanh(c)
                    G[n, t, u] = i_g
                    G[n, t, U + u] = f_g
                    G[n, t, 2 * U + u] = g_g
                    G[n, t, 3 * U + u] = o_g
    return H_arr, C_arr, G_arr


def lstm_backward(double[:, :, ::1] X, double[:, ::1] Wx, double[:, ::1] Wh,
                  double[:, :, ::1] H, double[:, :, ::1] C,
                  double[:, :, ::1] G, double[:, ::1] h0, double[:, ::1] c0,
                  double[:, :, ::1] dH):
    cdef Py_ssize_t B = X.shape[0], T = X.shape[1], D = X.shape[2]
    cdef Py_ssize_t U = Wh.shape[0]
    dX_arr = np.empty((B, T, D))
    dWx_arr = np.zeros((D, 4 * U))
    dWh_arr = np.zeros((U, 4 * U))
    db_arr = np.zeros(4 * U)
    dh0_arr = np.zeros((B, U))
    dc0_arr = np.zeros((B, U))
    cdef double[:, :, ::1] dX = dX_arr
    cdef double[:, ::1] dWx = dWx_arr
    cdef double[:, ::1] dWh = dWh_arr
    cdef double[::1] db = db_arr
    cdef double[:, ::1] dh0 = dh0_arr
    cdef double[:, ::1] dc0 = dc0_arr
    dh_arr = np.zeros((B, U))
    dc_arr = np.zeros((B, U))
    da_arr = np.zeros((B, 4 * U))
    cdef double[:, ::1] dh_carry = dh_arr
    cdef double[:, ::1] dc_carry = dc_arr
    cdef double[:, ::1] da = da_arr
    cdef Py_ssize_t n, t, u, j, q
    cdef double i_g, f_g, g_g, o_g, tc, dh, dc, cprev, acc
    with nogil:
        for t in range(T - 1, -1, -1):
            for n in range(B):
                for u in range(U):
                    i_g = G[n, t, u]
                    f_g = G[n, t, U + u]
                    g_g = G[n, t, 2 * U + u]
                    o_g = G[n, t, 3 * U + u]
                    tc = tanh(C[n, t, u])
                    cprev = c0[n, u] if t == 0 else C[n, t - 1, u]
                    dh = dH[n, t, u] + dh_carry[n, u]
                    dc = dc_carry[n, u] + dh * o_g * (1.0 - tc * tc)
                    da[n, u] = dc * g_g * i_g * (1.0 - i_g)
                    da[n, U + u] = dc * cprev * f_g * (1.0 - f_g)
                    da[n, 2 * U + u] = dc * i_g * (1.0 - g_g * g_g)
                    da[n, 3 * U + u] = dh * tc * o_g * (1.0 - o_g)
                    dc_carry[n, u] = dc * f_g
            for n in range(B):
                for q in range(4 * U):
                    acc = da[n, q]
                    db[q] += acc
                    for j in range(D):
                        dWx[j, q] += X[n, t, j] * acc
                    if t == 0:
                        for j in range(U):
                            dWh[j, q] += h0[n, j] * acc
                    else:
                        for j in range(U):
                            dWh[j, q] += H[n, t - 1, j] * acc
                for j in range(D):
                    acc = 0.0
                    for q in range(4 * U):
                        acc += da[n, q] * Wx[j, q]
                    dX[n, t, j] = acc
                for j in range(U):
                    acc = 0.0
                    for q in range(4 * U):
                        acc += da[n, q] * Wh[j, q]
                    dh_carry[n, j] = acc
        for n in range(B):
            for j in range(U):
                dh0[n, j] = dh_carry[n, j]
                dc0[n, j] = dc_carry[n, j]
    return dX_arr, dWx_arr, dWh_arr, db_arr, dh0_arr, dc0_arr


def conv1d_forward(double[:, :, ::1] X, double[:, :, ::1] K, double[::1] b,
                   bint relu=True):
    cdef Py_ssize_t B = X.shape[0], L = X.shape[1], Cin = X.shape[2]
    cdef Py_ssize_t F = K.shape[0], k = K.shape[1]
    cdef Py_ssize_t Lout = L - k + 1
    out_arr = np.empty((B, Lout, F))
    pre_arr = np.empty((B, Lout, F))
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, :, ::1] pre = pre_arr
    cdef Py_ssize_t n, t, f, j, c
    cdef double acc
    with nogil:
        for n in range(B):
            for t in range(Lout):
                for f in range(F):
                    acc = b[f]
                    for j in range(k):
                        for c in range(Cin):
                            acc += K[f, j, c] * X[n, t + j, c]
                    pre[n, t, f] = acc
                    out[n, t, f] = acc if (not relu or acc > 0.0) else 0.0
    return out_arr, pre_arr


def conv1d_backward(double[:, :, ::1] X, double[:, :, ::1] K,
                    double[:, :, ::1] pre, bint relu,
                    double[:, :, ::1] dY):
    cdef Py_ssize_t B = X.shape[0], L = X.shape[1], Cin = X.shape[2]
    cdef Py_ssize_t F = K.shape[0], k = K.shape[1]
    cdef Py_ssize_t Lout = L - k + 1
    dX_arr = np.zeros((B, L, Cin))
    dK_arr = np.zeros((F, k, Cin))
    db_arr = np.zeros(F)
    cdef double[:, :, ::1] dX = dX_arr
    cdef double[:, :, ::1] dK = dK_arr
    cdef double[::1] db = db_arr
    cdef Py_ssize_t n, t, f, j, c
    cdef double g
    with nogil:
        for n in range(B):
            for t in range(Lout):
                for f in range(F):
                    g = dY[n, t, f]
                    if relu and pre[n, t, f] <= 0.0:
                        continue
                    db[f] += g
                    for j in range(k):
                        for c in range(Cin):
                            dK[f, j, c] += g * X[n, t + j, c]
                            dX[n, t + j, c] += g * K[f, j, c]
    return dX_arr, dK_arr, db_arr
