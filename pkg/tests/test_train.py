import numpy as np
import pytest

from gaitpred.data import make_windows
from gaitpred.models import ModelKind, ModelSpec, build
from gaitpred.rng import SplitMix64
from gaitpred.synth import GaitProfile, generate_trial
from gaitpred.train import (
    Adam,
    RMSprop,
    TrainConfig,
    TrainError,
    fit,
    loss_value_and_grad,
)


# ---------------------------------------------------------------------------
# Losses


def test_loss_zero_at_perfect_fit():
    Y = SplitMix64(1).normal(12).reshape(2, 6)
    for kind in ("mae", "mse"):
        value, grad = loss_value_and_grad(kind, Y, Y)
        assert value == 0.0
        np.testing.assert_array_equal(grad, np.zeros_like(Y))


def test_loss_worked_example():
    y = np.array([1.0, 2.0, 3.0])
    yhat = np.array([2.0, 2.0, 5.0])
    mae, _ = loss_value_and_grad("mae", y, yhat)
    mse, _ = loss_value_and_grad("mse", y, yhat)
    assert mae == pytest.approx(1.0)
    assert mse == pytest.approx(5.0 / 3.0, abs=1e-12)


def test_mse_gradient_matches_finite_differences():
    rng = SplitMix64(2)
    Y = rng.normal(18).reshape(3, 6)
    P = rng.normal(18).reshape(3, 6)
    # central differences are exact for a quadratic, so a larger epsilon
    # only suppresses float cancellation
    _, grad = loss_value_and_grad("mse", Y, P)
    eps = 1e-4
    for idx in range(P.size):
        Pp = P.copy()
        Pm = P.copy()
        Pp.flat[idx] += eps
        Pm.flat[idx] -= eps
        num = (loss_value_and_grad("mse", Y, Pp)[0]
               - loss_value_and_grad("mse", Y, Pm)[0]) / (2 * eps)
        assert abs(grad.flat[idx] - num) / max(abs(num), 1e-12) <= 1e-8


def test_mae_subgradient_zero_at_ties():
    Y = np.array([1.0, 2.0])
    P = np.array([1.0, 3.0])
    _, grad = loss_value_and_grad("mae", Y, P)
    assert grad[0] == 0.0
    assert grad[1] == pytest.approx(0.5)


def test_loss_shape_mismatch():
    with pytest.raises(ValueError):
        loss_value_and_grad("mse", np.zeros(3), np.zeros(4))


# ---------------------------------------------------------------------------
# Optimizers


def _single_param(value):
    p = np.array([value], dtype=np.float64)
    g = np.zeros_like(p)
    return p, g


def test_adam_first_step_magnitude():
    p, g = _single_param(0.7)
    g[:] = 0.5
    opt = Adam(lr=1e-4)
    opt.step([("p", p, g)])
    assert abs((p[0] - 0.7) + 1e-4) < 1e-8  # step is -lr * sign(g)


def test_adam_zero_gradient_no_move():
    p, g = _single_param(0.3)
    opt = Adam(lr=0.1)
    opt.step([("p", p, g)])
    assert p[0] == 0.3


def test_adam_on_quadratic():
    # f(theta) = theta^2, grad 2*theta; 100 steps from 1.0 at lr 0.1
    p, _ = _single_param(1.0)
    opt = Adam(lr=0.1)
    prev = abs(p[0])
    for _ in range(100):
        g = 2.0 * p
        opt.step([("p", p, g)])
    assert abs(p[0]) < 0.1
    assert abs(p[0]) < prev


def test_rmsprop_first_step():
    p, g = _single_param(0.0)
    g[:] = 3.0
    opt = RMSprop(lr=0.01, rho=0.9)
    opt.step([("p", p, g)])
    expected = -0.01 * 3.0 / (np.sqrt(0.1 * 9.0) + 1e-8)
    assert p[0] == pytest.approx(expected, abs=1e-12)
    assert p[0] == pytest.approx(-0.03162, abs=1e-5)


def test_rmsprop_zero_gradient_no_move():
    p, g = _single_param(1.5)
    RMSprop(lr=0.01).step([("p", p, g)])
    assert p[0] == 1.5


def test_rmsprop_constant_gradient_step_approaches_lr():
    # accumulator saturates at g^2, so |step| -> lr
    p, g = _single_param(0.0)
    g[:] = 4.0
    opt = RMSprop(lr=0.01)
    for _ in range(400):
        before = p[0]
        opt.step([("p", p, g)])
    assert abs(before - p[0]) == pytest.approx(0.01, rel=1e-3)


def test_optimizer_state_shapes_mirror_params():
    spec = ModelSpec(ModelKind.LSTM2, 5, 1, hidden=4)
    model = build(spec, seed=1)
    X = SplitMix64(1).normal(2 * 5 * 6).reshape(2, 5, 6)
    Y = SplitMix64(2).normal(2 * 1 * 6).reshape(2, 1, 6)
    _, dY = loss_value_and_grad("mse", Y, model.forward(X, training=True))
    model.backward(dY)
    opt = Adam(lr=1e-3)
    opt.step(model.parameters())
    for key, p, _ in model.parameters():
        m, v = opt.state[key]
        assert m.shape == p.shape and v.shape == p.shape


# ---------------------------------------------------------------------------
# fit loop


def tiny_datasets(w_in=5, w_out=1, T=80, seed=3):
    trial = generate_trial(GaitProfile(noise_std=0.0, cadence_jitter=0.0),
                           max(T / 125.0, 1.0), seed=seed)
    values = trial.values[:T]
    train = make_windows(values[:60], w_in, w_out)
    val = make_windows(values[60:], w_in, w_out)
    return train, val


def test_fit_single_batch_single_step():
    train, val = tiny_datasets()
    spec = ModelSpec(ModelKind.SIMPLE_RNN, 5, 1, hidden=4)
    model = build(spec, seed=1)
    before = {k: p.copy() for k, p, _ in model.parameters()}
    cfg = TrainConfig(loss="mse", optimizer="adam", learning_rate=1e-3,
                      epochs=1, batch_size=10_000, seed=0)
    hist = fit(model, train, val, cfg)
    assert len(hist.train_losses) == 1
    assert len(hist.val_losses) == 1
    moved = [np.abs(p - before[k]).max() for k, p, _ in model.parameters()]
    assert max(moved) > 0


def test_fit_deterministic_bit_for_bit():
    train, val = tiny_datasets()
    cfg = TrainConfig(loss="mse", optimizer="adam", learning_rate=1e-3,
                      epochs=3, batch_size=8, shuffle=True, seed=42)
    params = []
    for _ in range(2):
        model = build(ModelSpec(ModelKind.LSTM2, 5, 1, hidden=4), seed=9)
        hist = fit(model, train, val, cfg)
        params.append({k: p.copy() for k, p, _ in model.parameters()})
        losses = (tuple(hist.train_losses), tuple(hist.val_losses))
    for k in params[0]:
        np.testing.assert_array_equal(params[0][k], params[1][k])


def test_fit_rejects_mismatched_windows():
    train, val = tiny_datasets(w_in=5, w_out=1)
    model = build(ModelSpec(ModelKind.SIMPLE_RNN, 6, 1, hidden=4), seed=1)
    with pytest.raises(TrainError):
        fit(model, train, val, TrainConfig(epochs=1))


def test_fit_rejects_empty_dataset():
    train, val = tiny_datasets()
    empty = make_windows(np.zeros((3, 6)), 5, 1)
    model = build(ModelSpec(ModelKind.SIMPLE_RNN, 5, 1, hidden=4), seed=1)
    with pytest.raises(TrainError):
        fit(model, empty, val, TrainConfig(epochs=1))


def test_minibatch_gradient_is_mean_of_per_example_gradients():
    train, _ = tiny_datasets()
    model = build(ModelSpec(ModelKind.SIMPLE_RNN, 5, 1, hidden=4), seed=2)
    X3 = train.X[:3]
    Y3 = train.Y[:3]
    _, dY = loss_value_and_grad("mse", Y3, model.forward(X3))
    model.backward(dY)
    batch_grads = {k: g.copy() for k, _, g in model.parameters()}

    acc = {k: np.zeros_like(g) for k, g in batch_grads.items()}
    for i in range(3):
        _, dY1 = loss_value_and_grad("mse", Y3[i:i + 1],
                                     model.forward(X3[i:i + 1]))
        model.backward(dY1)
        for k, _, g in model.parameters():
            acc[k] += g / 3.0
    for k in batch_grads:
        np.testing.assert_allclose(batch_grads[k], acc[k], rtol=1e-10,
                                   atol=1e-14)


def test_history_csv(tmp_path):
    train, val = tiny_datasets()
    model = build(ModelSpec(ModelKind.SIMPLE_RNN, 5, 1, hidden=4), seed=1)
    hist = fit(model, train, val, TrainConfig(epochs=2, learning_rate=1e-3))
    path = tmp_path / "history.csv"
    hist.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,train_loss,val_loss"
    assert len(lines) == 3


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(loss="huber")
    with pytest.raises(ValueError):
        TrainConfig(optimizer="sgd")
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
