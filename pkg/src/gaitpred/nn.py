"""Neural layers with exact hand-derived forward/backward passes.

Dense, simple RNN, LSTM, bidirectional LSTM and valid 1-D convolution, plus
a finite-difference gradient checker. The recurrent/convolution inner loops
live in gaitpred._kernels (compiled core when built, numpy fallback
otherwise); this module owns parameters, caching and gradient bookkeeping.

All math is double precision. Layers take a batch-first (B, T, D) sequence;
a single (T, D) sequence is promoted to a batch of one.
"""

from __future__ import annotations

import numpy as np

from . import _kernels as kernels
from ._kernels import reference as _reference
from .rng import SplitMix64, derive_seed


def glorot_uniform(rng: SplitMix64, shape: tuple, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform_range(-limit, limit, int(np.prod(shape))).reshape(shape)


def _as_batch(X: np.ndarray) -> tuple:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 2:
        return X[None, :, :], True
    if X.ndim == 3:
        return X, False
    raise ValueError(f"expected (T, D) or (B, T, D) input, got shape {X.shape}")


class Dense:
    """y = W x + b with W stored (out, in). No activation; used as the
    linear regression head."""

    def __init__(self, in_dim: int, out_dim: int, seed: int = 0):
        rng = SplitMix64(seed)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.params = {
            "W": glorot_uniform(rng, (out_dim, in_dim), in_dim, out_dim),
            "b": np.zeros(out_dim),
        }
        self.grads = {}
        self._x = None

    def forward(self, X: np.ndarray, training: bool = False) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.shape[1] != self.in_dim:
            raise ValueError(f"expected input width {self.in_dim}, got {X.shape[1]}")
        self._x = X
        y = X @ self.params["W"].T + self.params["b"]
        return y[0] if single else y

    def backward(self, dY: np.ndarray) -> np.ndarray:
        dY = np.asarray(dY, dtype=np.float64)
        single = dY.ndim == 1
        if single:
            dY = dY[None, :]
        self.grads = {"W": dY.T @ self._x, "b": dY.sum(axis=0)}
        dX = dY @ self.params["W"]
        return dX[0] if single else dX

    def parameters(self):
        for name, p in self.params.items():
            yield name, p, self.grads.get(name)


class SimpleRNN:
    """h_t = tanh(Wx x_t + Wh h_{t-1} + b), h_0 = 0. Full-length BPTT."""

    def __init__(self, in_dim: int, hidden: int, seed: int = 0,
                 return_sequence: bool = True, recurrent_dropout: float = 0.0):
        rng = SplitMix64(seed)
        self.in_dim = in_dim
        self.hidden = hidden
        self.return_sequence = return_sequence
        self.recurrent_dropout = recurrent_dropout
        self._drop_rng = SplitMix64(derive_seed(seed, "rdrop"))
        self.params = {
            "Wx": glorot_uniform(rng, (in_dim, hidden), in_dim, hidden),
            "Wh": glorot_uniform(rng, (hidden, hidden), hidden, hidden),
            "b": np.zeros(hidden),
        }
        self.grads = {}
        self._cache = None

    def _rmask(self, B: int, training: bool):
        p = self.recurrent_dropout
        if not training or p <= 0.0:
            return None
        keep = (self._drop_rng.uniform(B * self.hidden) >= p).reshape(B, self.hidden)
        return keep / (1.0 - p)

    def forward(self, X: np.ndarray, training: bool = False) -> np.ndarray:
        X, single = _as_batch(X)
        B = X.shape[0]
        h0 = np.zeros((B, self.hidden))
        rmask = self._rmask(B, training)
        if rmask is None:
            H = kernels.rnn_forward(X, self.params["Wx"], self.params["Wh"],
                                    self.params["b"], h0)
        else:
            H = _reference.rnn_forward(X, self.params["Wx"], self.params["Wh"],
                                       self.params["b"], h0, rmask)
        self._cache = (X, H, h0, rmask)
        out = H if self.return_sequence else H[:, -1]
        return out[0] if single else out

    def backward(self, dY: np.ndarray) -> np.ndarray:
        X, H, h0, rmask = self._cache
        B, T, _ = X.shape
        dY = np.asarray(dY, dtype=np.float64)
        if dY.ndim == (3 if self.return_sequence else 2) - 1:
            dY = dY[None, ...]
        if self.return_sequence:
            dH = np.ascontiguousarray(dY)
        else:
            dH = np.zeros((B, T, self.hidden))
            dH[:, -1] = dY
        if rmask is None:
            dX, dWx, dWh, db, _ = kernels.rnn_backward(
                X, self.params["Wx"], self.params["Wh"], H, h0, dH)
        else:
            dX, dWx, dWh, db, _ = _reference.rnn_backward(
                X, self.params["Wx"], self.params["Wh"], H, h0, dH, rmask)
        self.grads = {"Wx": dWx, "Wh": dWh, "b": db}
        return dX

    def parameters(self):
        for name, p in self.params.items():
            yield name, p, self.grads.get(name)


class LSTM:
    """Standard LSTM: i,f,o = sigmoid, g = tanh, c_t = f*c + i*g,
    h_t = o*tanh(c_t). Gates stored fused in order i, f, g, o; the forget
    bias quarter is initialized to 1."""

    def __init__(self, in_dim: int, hidden: int, seed: int = 0,
                 return_sequence: bool = True, recurrent_dropout: float = 0.0,
                 input_dropout: float = 0.0):
        rng = SplitMix64(seed)
        self.in_dim = in_dim
        self.hidden = hidden
        self.return_sequence = return_sequence
        self.recurrent_dropout = recurrent_dropout
        self.input_dropout = input_dropout
        self._drop_rng = SplitMix64(derive_seed(seed, "dropout"))
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0
        self.params = {
            "Wx": glorot_uniform(rng, (in_dim, 4 * hidden), in_dim, hidden),
            "Wh": glorot_uniform(rng, (hidden, 4 * hidden), hidden, hidden),
            "b": b,
        }
        self.grads = {}
        self._cache = None

    def _masks(self, B: int, training: bool):
        rmask = imask = None
        if training and self.recurrent_dropout > 0.0:
            p = self.recurrent_dropout
            keep = (self._drop_rng.uniform(B * self.hidden) >= p).reshape(B, self.hidden)
            rmask = keep / (1.0 - p)
        if training and self.input_dropout > 0.0:
            p = self.input_dropout
            keep = (self._drop_rng.uniform(B * self.in_dim) >= p).reshape(B, 1, self.in_dim)
            imask = keep / (1.0 - p)
        return rmask, imask

    def forward(self, X: np.ndarray, training: bool = False) -> np.ndarray:
        X, single = _as_batch(X)
        B = X.shape[0]
        rmask, imask = self._masks(B, training)
        Xd = np.ascontiguousarray(X * imask) if imask is not None else X
        h0 = np.zeros((B, self.hidden))
        c0 = np.zeros((B, self.hidden))
        if rmask is None:
            H, C, G = kernels.lstm_forward(Xd, self.params["Wx"], self.params["Wh"],
                                           self.params["b"], h0, c0)
        else:
            H, C, G = _reference.lstm_forward(Xd, self.params["Wx"], self.params["Wh"],
                                              self.params["b"], h0, c0, rmask)
        self._cache = (Xd, H, C, G, h0, c0, rmask, imask)
        out = H if self.return_sequence else H[:, -1]
        return out[0] if single else out

    def backward(self, dY: np.ndarray) -> np.ndarray:
        Xd, H, C, G, h0, c0, rmask, imask = self._cache
        B, T, _ = Xd.shape
        dY = np.asarray(dY, dtype=np.float64)
        if dY.ndim == (3 if self.return_sequence else 2) - 1:
            dY = dY[None, ...]
        if self.return_sequence:
            dH = np.ascontiguousarray(dY)
        else:
            dH = np.zeros((B, T, self.hidden))
            dH[:, -1] = dY
        if rmask is None:
            dX, dWx, dWh, db, _, _ = kernels.lstm_backward(
                Xd, self.params["Wx"], self.params["Wh"], H, C, G, h0, c0, dH)
        else:
            dX, dWx, dWh, db, _, _ = _reference.lstm_backward(
                Xd, self.params["Wx"], self.params["Wh"], H, C, G, h0, c0, dH, rmask)
        self.grads = {"Wx": dWx, "Wh": dWh, "b": db}
        if imask is not None:
            dX = dX * imask
        return dX

    def parameters(self):
        for name, p in self.params.items():
            yield name, p, self.grads.get(name)


class BiLSTM:
    """Two LSTMs over the original and the time-reversed input; the
    backward outputs are re-reversed and concatenated, so step t carries
    both past and future context. Output width is 2 * hidden."""

    def __init__(self, in_dim: int, hidden: int, seed: int = 0,
                 return_sequence: bool = True, recurrent_dropout: float = 0.0):
        self.in_dim = in_dim
        self.hidden = hidden
        self.return_sequence = return_sequence
        self.fwd = LSTM(in_dim, hidden, derive_seed(seed, "fwd"),
                        return_sequence=True, recurrent_dropout=recurrent_dropout)
        self.bwd = LSTM(in_dim, hidden, derive_seed(seed, "bwd"),
                        return_sequence=True, recurrent_dropout=recurrent_dropout)

    def forward(self, X: np.ndarray, training: bool = False) -> np.ndarray:
        X, single = _as_batch(X)
        Hf = self.fwd.forward(X, training)
        Hb_rev = self.bwd.forward(np.ascontiguousarray(X[:, ::-1]), training)
        if self.return_sequence:
            out = np.concatenate([Hf, Hb_rev[:, ::-1]], axis=2)
        else:
            # final state of each direction: forward at t = T-1, backward at
            # its own last step (which corresponds to original t = 0)
            out = np.concatenate([Hf[:, -1], Hb_rev[:, -1]], axis=1)
        return out[0] if single else out

    def backward(self, dY: np.ndarray) -> np.ndarray:
        dY = np.asarray(dY, dtype=np.float64)
        if self.return_sequence:
            if dY.ndim == 2:
                dY = dY[None, ...]
            dXf = self.fwd.backward(dY[:, :, :self.hidden])
            dXb = self.bwd.backward(np.ascontiguousarray(dY[:, ::-1, self.hidden:]))
        else:
            if dY.ndim == 1:
                dY = dY[None, :]
            T = self.fwd._cache[0].shape[1]
            B = dY.shape[0]
            dHf = np.zeros((B, T, self.hidden))
            dHf[:, -1] = dY[:, :self.hidden]
            dHb = np.zeros((B, T, self.hidden))
            dHb[:, -1] = dY[:, self.hidden:]
            dXf = self.fwd.backward(dHf)
            dXb = self.bwd.backward(dHb)
        return dXf + np.ascontiguousarray(dXb[:, ::-1])

    def parameters(self):
        for name, p, g in self.fwd.parameters():
            yield f"fwd.{name}", p, g
        for name, p, g in self.bwd.parameters():
            yield f"bwd.{name}", p, g


class Conv1D:
    """Valid 1-D convolution (no padding): (B, L, C) -> (B, L-k+1, F),
    rectified by default."""

    def __init__(self, in_channels: int, filters: int, kernel: int,
                 seed: int = 0, activation: str = "relu"):
        if activation not in ("relu", None):
            raise ValueError("activation must be 'relu' or None")
        rng = SplitMix64(seed)
        self.in_channels = in_channels
        self.filters = filters
        self.kernel = kernel
        self.relu = activation == "relu"
        fan_in = kernel * in_channels
        self.params = {
            "K": glorot_uniform(rng, (filters, kernel, in_channels), fan_in, filters),
            "b": np.zeros(filters),
        }
        self.grads = {}
        self._cache = None

    def forward(self, X: np.ndarray, training: bool = False) -> np.ndarray:
        X, single = _as_batch(X)
        if X.shape[1] < self.kernel:
            raise ValueError(
                f"input length {X.shape[1]} shorter than kernel {self.kernel}")
        Y, pre = kernels.conv1d_forward(X, self.params["K"], self.params["b"], self.relu)
        self._cache = (X, pre)
        return Y[0] if single else Y

    def backward(self, dY: np.ndarray) -> np.ndarray:
        X, pre = self._cache
        dY = np.asarray(dY, dtype=np.float64)
        if dY.ndim == 2:
            dY = dY[None, ...]
        dX, dK, db = kernels.conv1d_backward(X, self.params["K"], pre, self.relu,
                                             np.ascontiguousarray(dY))
        self.grads = {"K": dK, "b": db}
        return dX

    def parameters(self):
        for name, p in self.params.items():
            yield name, p, self.grads.get(name)


# ---------------------------------------------------------------------------
# Finite-difference gradient checking


def gradient_check(target, X: np.ndarray, epsilon: float = 1e-5,
                   seed: int = 0, corrupt: str | None = None) -> float:
    """Compare analytic gradients against central finite differences.

    The probe loss is sum(r * output) for a fixed random r, so its gradient
    w.r.t. the output is exactly r. Checks every parameter entry and every
    input entry; returns the maximum relative error
    |a - n| / max(|a|, |n|, 1e-12).

    `corrupt` names a parameter ("Wx", "head.W", or "input") whose first
    analytic gradient entry is doubled, for fault-injection tests.
    """
    if not (1e-7 <= epsilon <= 1e-3):
        raise ValueError("epsilon must be in [1e-7, 1e-3]")
    X = np.array(X, dtype=np.float64)
    y0 = target.forward(X)
    rng = SplitMix64(derive_seed(seed, "probe"))
    r = rng.normal(y0.size).reshape(y0.shape)

    dX = np.asarray(target.backward(r), dtype=np.float64).reshape(X.shape)
    analytic = {name: np.array(g) for name, _, g in target.parameters()}
    analytic["input"] = dX
    if corrupt is not None:
        analytic[corrupt].flat[0] *= 2.0

    def probe() -> float:
        return float(np.sum(r * target.forward(X)))

    max_err = 0.0
    targets = [(name, p) for name, p, _ in target.parameters()] + [("input", X)]
    for name, arr in targets:
        grad = analytic[name]
        flat = arr.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + epsilon
            lp = probe()
            flat[idx] = orig - epsilon
            lm = probe()
            flat[idx] = orig
            numeric = (lp - lm) / (2.0 * epsilon)
            a = grad.reshape(-1)[idx]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-12)
            max_err = max(max_err, err)
    target.forward(X)  # restore caches for the unperturbed input
    return max_err
