"""The four prediction architectures assembled from the layer zoo, plus
whole-trial prediction and parameter serialization.

Every model consumes a (w_in, 6) window and emits a 6 * w_out dense head
output, reshaped row-major to (w_out, 6): row = time step, column = sensor.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from enum import Enum

import numpy as np

from .data import N_CHANNELS
from .nn import BiLSTM, Conv1D, Dense, LSTM, SimpleRNN
from .rng import derive_seed

FORMAT_VERSION = 1


class ModelKind(str, Enum):
    SIMPLE_RNN = "simple"
    LSTM2 = "lstm"
    BILSTM2 = "bilstm"
    CNN_RNN = "cnnrnn"

    @classmethod
    def parse(cls, name: str) -> "ModelKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown model kind {name!r} (valid: {valid})") from None


@dataclass
class ModelSpec:
    kind: ModelKind
    w_in: int
    w_out: int
    hidden: int = 20
    conv_filters: int = 20
    conv_kernel: int = 3
    dropout_enabled: bool = False

    def __post_init__(self):
        self.kind = ModelKind(self.kind)
        if self.w_in < 1 or self.w_out < 1 or self.hidden < 1:
            raise ValueError("w_in, w_out and hidden must be >= 1")
        if self.kind is ModelKind.CNN_RNN:
            min_in = 2 * (self.conv_kernel - 1) + 1
            if self.w_in < min_in:
                raise ValueError(
                    f"cnnrnn needs w_in >= {min_in} so two valid kernel-"
                    f"{self.conv_kernel} convolutions keep length >= 1 "
                    f"(got w_in={self.w_in})"
                )


class Model:
    """Layer stack plus the 6 * w_out dense head."""

    def __init__(self, spec: ModelSpec, layers: list, head: Dense):
        self.spec = spec
        self.layers = layers
        self.head = head

    def forward(self, X: np.ndarray, training: bool = False) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 2
        if single:
            X = X[None, ...]
        if X.shape[1:] != (self.spec.w_in, N_CHANNELS):
            raise ValueError(
                f"expected input windows of shape ({self.spec.w_in}, {N_CHANNELS}), "
                f"got {X.shape[1:]}"
            )
        h = X
        for layer in self.layers:
            h = layer.forward(h, training)
        y = self.head.forward(h, training)
        Y = y.reshape(-1, self.spec.w_out, N_CHANNELS)
        return Y[0] if single else Y

    def backward(self, dY: np.ndarray) -> np.ndarray:
        dY = np.asarray(dY, dtype=np.float64)
        if dY.ndim == 2:
            dY = dY[None, ...]
        d = self.head.backward(dY.reshape(len(dY), -1))
        for layer in reversed(self.layers):
            d = layer.backward(d)
        return d

    def parameters(self):
        for i, layer in enumerate(self.layers):
            for name, p, g in layer.parameters():
                yield f"layer{i}.{name}", p, g
        for name, p, g in self.head.parameters():
            yield f"head.{name}", p, g

    @property
    def n_parameters(self) -> int:
        return sum(p.size for _, p, _ in self.parameters())

    def clone_spec_json(self) -> str:
        d = asdict(self.spec)
        d["kind"] = self.spec.kind.value
        return json.dumps(d, sort_keys=True)


def build(spec: ModelSpec, seed: int) -> Model:
    """Deterministically initialize a model of the given kind.

    Stacked recurrent wiring: the first recurrent layer emits its full
    hidden sequence, the second (or the conv-fed LSTM) only its final
    state, which feeds the dense head.
    """
    k = spec.kind
    h = spec.hidden
    rdrop = 0.5 if spec.dropout_enabled else 0.0
    s = lambda *parts: derive_seed(seed, *parts)

    if k is ModelKind.SIMPLE_RNN:
        layers = [SimpleRNN(N_CHANNELS, h, s("rnn0"), return_sequence=False,
                            recurrent_dropout=rdrop)]
        head_in = h
    elif k is ModelKind.LSTM2:
        layers = [
            LSTM(N_CHANNELS, h, s("lstm0"), return_sequence=True,
                 recurrent_dropout=rdrop),
            LSTM(h, h, s("lstm1"), return_sequence=False),
        ]
        head_in = h
    elif k is ModelKind.BILSTM2:
        layers = [
            BiLSTM(N_CHANNELS, h, s("bilstm0"), return_sequence=True,
                   recurrent_dropout=rdrop),
            BiLSTM(2 * h, h, s("bilstm1"), return_sequence=False),
        ]
        head_in = 2 * h
    elif k is ModelKind.CNN_RNN:
        layers = [
            Conv1D(N_CHANNELS, spec.conv_filters, spec.conv_kernel, s("conv0")),
            Conv1D(spec.conv_filters, spec.conv_filters, spec.conv_kernel, s("conv1")),
            LSTM(spec.conv_filters, h, s("lstm0"), return_sequence=False,
                 recurrent_dropout=rdrop,
                 input_dropout=0.1 if spec.dropout_enabled else 0.0),
        ]
        head_in = h
    else:  # pragma: no cover
        raise ValueError(f"unhandled kind {k}")

    head = Dense(head_in, N_CHANNELS * spec.w_out, s("head"))
    return Model(spec, layers, head)


# ---------------------------------------------------------------------------
# Whole-trial prediction


@dataclass
class TrialPrediction:
    """Stitched whole-trial prediction: (T, 6) values with a validity mask
    (the first w_in steps have no prediction) and the wall-clock seconds
    the forward passes took."""

    values: np.ndarray
    valid: np.ndarray
    predict_seconds: float


def tile_starts(T: int, w_in: int, w_out: int) -> list:
    """Window starts at stride w_out so predictions tile [w_in, T) without
    overlap, plus a right-aligned final window when the grid leaves a
    ragged tail."""
    last = T - w_in - w_out
    starts = list(range(0, last + 1, w_out))
    if starts[-1] != last:
        starts.append(last)
    return starts


def predict_trial(model, values: np.ndarray, w_in: int | None = None,
                  w_out: int | None = None, mode: str = "tile") -> TrialPrediction:
    """Predict a whole trial from measured values (non-autoregressive).

    Every input window is taken from the true test data. In "tile" mode
    windows start at multiples of w_out and consecutive predictions tile
    without overlap (a right-aligned final window fills the ragged tail,
    keeping only previously-unfilled steps). In "overlap" mode all stride-1
    windows are predicted and overlapping predictions are averaged.

    `model` needs only a forward(batch) -> (B, w_out, 6) method; the
    persistence baseline plugs in here too.
    """
    if mode not in ("tile", "overlap"):
        raise ValueError("mode must be 'tile' or 'overlap'")
    spec = getattr(model, "spec", None)
    w_in = w_in if w_in is not None else spec.w_in
    w_out = w_out if w_out is not None else spec.w_out
    values = np.asarray(values, dtype=np.float64)
    T = len(values)
    if T < w_in + w_out:
        raise ValueError(f"trial of length {T} too short for ({w_in}, {w_out}) windows")

    if mode == "tile":
        starts = tile_starts(T, w_in, w_out)
    else:
        starts = list(range(0, T - w_in - w_out + 1))
    X = np.stack([values[s:s + w_in] for s in starts])

    t0 = time.perf_counter()
    preds = model.forward(X)
    seconds = time.perf_counter() - t0

    out = np.zeros((T, N_CHANNELS))
    if mode == "tile":
        filled = np.zeros(T, dtype=bool)
        for i, s in enumerate(starts):
            for j in range(w_out):
                t = s + w_in + j
                if not filled[t]:
                    out[t] = preds[i, j]
                    filled[t] = True
        valid = filled
    else:
        counts = np.zeros(T)
        for i, s in enumerate(starts):
            out[s + w_in:s + w_in + w_out] += preds[i]
            counts[s + w_in:s + w_in + w_out] += 1.0
        valid = counts > 0
        out[valid] /= counts[valid, None]
    return TrialPrediction(out, valid, seconds)


class PersistenceModel:
    """Baseline that repeats the window's last observed frame w_out times."""

    def __init__(self, w_in: int, w_out: int):
        self.spec = ModelSpec(ModelKind.SIMPLE_RNN, w_in, w_out)  # shape only
        self.w_in = w_in
        self.w_out = w_out

    def forward(self, X: np.ndarray, training: bool = False) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 2
        if single:
            X = X[None, ...]
        Y = np.repeat(X[:, -1:, :], self.w_out, axis=1)
        return Y[0] if single else Y


# ---------------------------------------------------------------------------
# Parameter serialization (numpy archive with named, shape-tagged arrays)


def save_model(model: Model, path) -> None:
    """Write parameters as an .npz archive: one named float64 array per
    parameter, plus format version and the model spec as JSON. Binary
    round-trip is bit-exact."""
    arrays = {name: p for name, p, _ in model.parameters()}
    arrays["__format_version__"] = np.array(FORMAT_VERSION)
    arrays["__spec_json__"] = np.array(model.clone_spec_json())
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path) -> Model:
    with np.load(path, allow_pickle=False) as archive:
        version = int(archive["__format_version__"])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version}")
        d = json.loads(str(archive["__spec_json__"]))
        d["kind"] = ModelKind(d["kind"])
        spec = ModelSpec(**d)
        model = build(spec, seed=0)
        for name, p, _ in model.parameters():
            stored = archive[name]
            if stored.shape != p.shape:
                raise ValueError(f"shape mismatch for {name}: {stored.shape} vs {p.shape}")
            p[...] = stored
    return model
