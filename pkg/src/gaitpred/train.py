"""Losses, optimizers and the mini-batch training loop.

Training is deterministic for a fixed seed: shuffling comes from the
package PRNG and each fit call owns its model exclusively.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import WindowedDataset
from .rng import SplitMix64, derive_seed

LOSS_KINDS = ("mse", "mae")
OPTIMIZER_KINDS = ("adam", "rmsprop")


class TrainError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    loss: str = "mse"
    optimizer: str = "adam"
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    rho: float = 0.9
    epsilon: float = 1e-8
    epochs: int = 40
    batch_size: int = 32
    shuffle: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"loss must be one of {LOSS_KINDS}")
        if self.optimizer not in OPTIMIZER_KINDS:
            raise ValueError(f"optimizer must be one of {OPTIMIZER_KINDS}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass
class TrainHistory:
    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    train_seconds: float = 0.0
    predict_seconds: float = 0.0

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("epoch,train_loss,val_loss\n")
            for i, (tr, va) in enumerate(zip(self.train_losses, self.val_losses), 1):
                fh.write(f"{i},{tr!r},{va!r}\n")


def loss_value_and_grad(kind: str, Y_true: np.ndarray, Y_pred: np.ndarray):
    """Loss over all elements jointly, and its gradient w.r.t. Y_pred.

    mae: mean |pred - true|, subgradient sign(pred - true) / N (0 at ties).
    mse: mean (pred - true)^2, gradient 2 (pred - true) / N.
    """
    Y_true = np.asarray(Y_true, dtype=np.float64)
    Y_pred = np.asarray(Y_pred, dtype=np.float64)
    if Y_true.shape != Y_pred.shape:
        raise ValueError(f"shape mismatch: {Y_true.shape} vs {Y_pred.shape}")
    diff = Y_pred - Y_true
    n = diff.size
    if kind == "mse":
        return float(np.mean(diff * diff)), 2.0 * diff / n
    if kind == "mae":
        return float(np.mean(np.abs(diff))), np.sign(diff) / n
    raise ValueError(f"unknown loss kind {kind!r}")


class Adam:
    """Bias-corrected first/second-moment update (beta1=0.9, beta2=0.999)."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 epsilon: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.state = {}

    def step(self, parameters) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for key, p, g in parameters:
            if g is None:
                raise TrainError(f"parameter {key} has no gradient")
            if g.shape != p.shape:
                raise TrainError(f"gradient shape mismatch for {key}")
            if key not in self.state:
                self.state[key] = (np.zeros_like(p), np.zeros_like(p))
            m, v = self.state[key]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.epsilon)


class RMSprop:
    """Accumulator s <- rho s + (1 - rho) g^2; step -lr g / (sqrt(s) + eps)."""

    def __init__(self, lr: float, rho: float = 0.9, epsilon: float = 1e-8):
        self.lr = lr
        self.rho = rho
        self.epsilon = epsilon
        self.state = {}

    def step(self, parameters) -> None:
        for key, p, g in parameters:
            if g is None:
                raise TrainError(f"parameter {key} has no gradient")
            if g.shape != p.shape:
                raise TrainError(f"gradient shape mismatch for {key}")
            if key not in self.state:
                self.state[key] = np.zeros_like(p)
            s = self.state[key]
            s *= self.rho
            s += (1 - self.rho) * g * g
            p -= self.lr * g / (np.sqrt(s) + self.epsilon)


def make_optimizer(config: TrainConfig):
    if config.optimizer == "adam":
        return Adam(config.learning_rate, config.beta1, config.beta2, config.epsilon)
    return RMSprop(config.learning_rate, config.rho, config.epsilon)


def evaluate_loss(model, dataset: WindowedDataset, kind: str,
                  batch_size: int = 256) -> float:
    """Mean per-window loss over a dataset, without touching gradients."""
    total = 0.0
    for lo in range(0, len(dataset), batch_size):
        Xb = dataset.X[lo:lo + batch_size]
        Yb = dataset.Y[lo:lo + batch_size]
        value, _ = loss_value_and_grad(kind, Yb, model.forward(Xb))
        total += value * len(Xb)
    return total / len(dataset)


def fit(model, train: WindowedDataset, val: WindowedDataset,
        config: TrainConfig) -> TrainHistory:
    """Train in place for a fixed number of epochs (no early stopping;
    validation loss is monitored, not acted on)."""
    if len(train) == 0 or len(val) == 0:
        raise TrainError("train and validation datasets must be non-empty")
    if model.spec.w_in != train.w_in or model.spec.w_out != train.w_out:
        raise TrainError(
            f"model windows ({model.spec.w_in}, {model.spec.w_out}) do not match "
            f"dataset windows ({train.w_in}, {train.w_out})"
        )

    optimizer = make_optimizer(config)
    shuffle_rng = SplitMix64(derive_seed(config.seed, "shuffle"))
    history = TrainHistory()
    n = len(train)
    t0 = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n) if config.shuffle else np.arange(n)
        epoch_total = 0.0
        for bi, lo in enumerate(range(0, n, config.batch_size)):
            idx = order[lo:lo + config.batch_size]
            Xb = np.ascontiguousarray(train.X[idx])
            Yb = train.Y[idx]
            Yp = model.forward(Xb, training=True)
            value, dY = loss_value_and_grad(config.loss, Yb, Yp)
            if not np.isfinite(value):
                raise TrainError(
                    f"non-finite loss at epoch {epoch}, batch {bi + 1}")
            model.backward(dY)
            optimizer.step(model.parameters())
            epoch_total += value * len(idx)
        history.train_losses.append(epoch_total / n)
        history.val_losses.append(evaluate_loss(model, val, config.loss))
    history.train_seconds = time.perf_counter() - t0
    return history
