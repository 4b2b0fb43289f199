"""End-to-end experiment protocols over a corpus.

`by trial`: one trial split 70/15/15 in time order, w_in=5 / w_out=1,
one-step prediction over the test region.

`by participant`: one trial held out for test, one for validation, the
rest windowed and concatenated for training; a grid of window sizes; the
fitted model predicts the entire held-out trial.

A persistence baseline (repeat the last observed frame) runs alongside the
trained models as a scale-free reference. Per-cell failures are recorded,
not fatal.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import (
    SplitSpec,
    Trial,
    assemble_by_participant,
    fit_normalizer,
    make_windows,
    normalize_values,
    split_boundaries,
)
from .metrics import (
    MetricsRecord,
    aggregate,
    compute_metrics,
    emit_plot,
    summed_series,
    write_report_csv,
)
from .models import (
    Model,
    ModelKind,
    ModelSpec,
    PersistenceModel,
    TrialPrediction,
    build,
    predict_trial,
    save_model,
)
from .rng import derive_seed
from .train import TrainConfig, TrainHistory, fit
from ._kernels import BACKEND

BY_TRIAL_WINDOW = (5, 1)
BY_PARTICIPANT_GRID = tuple(
    (w_in, w_out) for w_in in (5, 10, 15, 20) for w_out in (3, 4, 5)
)
PERSISTENCE = "persistence"
ALL_KINDS = tuple(ModelKind)


@dataclass
class ExperimentConfig:
    protocol: str = "trial"
    model_kinds: tuple = ALL_KINDS
    include_baseline: bool = True
    normalization: str = "unit"
    seed: int = 0
    batch_size: int = 32
    shuffle: bool = True
    hidden: int = 20
    dropout_enabled: bool = False
    stitch_mode: str = "tile"
    epochs_override: int | None = None
    grid: tuple = BY_PARTICIPANT_GRID
    test_trial_index: int | None = None
    val_trial_index: int | None = None

    def __post_init__(self):
        if self.protocol not in ("trial", "participant"):
            raise ValueError("protocol must be 'trial' or 'participant'")
        if self.normalization not in ("unit", "offset"):
            raise ValueError("normalization must be 'unit' or 'offset'")
        self.model_kinds = tuple(ModelKind(k) for k in self.model_kinds)
        self.grid = tuple((int(a), int(b)) for a, b in self.grid)

    def metadata(self) -> dict:
        return {
            "protocol": self.protocol,
            "seed": self.seed,
            "normalization": self.normalization,
            "batch_size": self.batch_size,
            "shuffle": self.shuffle,
            "hidden": self.hidden,
            "stitch_mode": self.stitch_mode,
            "dropout": self.dropout_enabled,
            "backend": BACKEND,
        }


def train_config_for(kind: ModelKind, protocol: str,
                     cfg: ExperimentConfig, seed: int) -> TrainConfig:
    """Per-architecture settings: Adam 1e-4 for the recurrent models,
    RMSprop 1e-2 for the conv+LSTM ensemble; MSE/40 epochs for the
    short-distance protocol, MAE/20 epochs for the long-distance one."""
    if kind is ModelKind.CNN_RNN:
        optimizer, lr = "rmsprop", 1e-2
    else:
        optimizer, lr = "adam", 1e-4
    if protocol == "trial":
        loss, epochs = "mse", 40
    else:
        loss, epochs = "mae", 20
    if cfg.epochs_override is not None:
        epochs = cfg.epochs_override
    return TrainConfig(loss=loss, optimizer=optimizer, learning_rate=lr,
                       epochs=epochs, batch_size=cfg.batch_size,
                       shuffle=cfg.shuffle, seed=seed)


@dataclass
class CellResult:
    """Outcome of one (model kind, window config) cell."""

    kind: str
    w_in: int
    w_out: int
    record: MetricsRecord | None = None
    history: TrainHistory | None = None
    prediction: TrialPrediction | None = None
    true_values: np.ndarray | None = None
    model: Model | None = None
    error: str | None = None
    train_seconds: float = 0.0
    predict_seconds: float = 0.0
    measured_test_seconds: float = 0.0

    @property
    def label(self) -> str:
        return f"{self.kind}_{self.w_in}x{self.w_out}"

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ExperimentResult:
    protocol: str
    participant_id: str
    cells: list = field(default_factory=list)
    test_trial_id: str = ""
    val_trial_id: str = ""

    @property
    def records(self) -> list:
        return [c.record for c in self.cells if c.ok]

    @property
    def errors(self) -> dict:
        return {c.label: c.error for c in self.cells if not c.ok}

    @property
    def all_failed(self) -> bool:
        return all(not c.ok for c in self.cells)


def _cell_seed(run_seed: int, protocol: str, w_in: int, w_out: int, kind: str) -> int:
    return derive_seed(run_seed, "cell", protocol, w_in, w_out, kind)


# ---------------------------------------------------------------------------
# by trial


def run_by_trial(trial: Trial, cfg: ExperimentConfig) -> ExperimentResult:
    """Short-distance protocol on a single trial.

    All model kinds share the same split and normalizer. Test-region
    prediction slides one step at a time (w_out = 1), so every test step
    from w_in on receives exactly one prediction.
    """
    w_in, w_out = BY_TRIAL_WINDOW
    n_train, n_val, n_test = split_boundaries(len(trial), w_in, w_out, SplitSpec())
    raw = trial.values
    normalizer = fit_normalizer(raw[:n_train], cfg.normalization == "unit")
    train_vals = normalize_values(raw[:n_train], normalizer)
    val_vals = normalize_values(raw[n_train:n_train + n_val], normalizer)
    test_vals = normalize_values(raw[n_train + n_val:], normalizer)
    train = make_windows(train_vals, w_in, w_out)
    val = make_windows(val_vals, w_in, w_out)
    test = make_windows(test_vals, w_in, w_out)
    measured_s = n_test * trial.sample_period_ms / 1000.0

    result = ExperimentResult("trial", trial.participant_id,
                              test_trial_id=trial.trial_id)
    kinds = [k.value for k in cfg.model_kinds]
    if cfg.include_baseline:
        kinds.append(PERSISTENCE)
    for kind in kinds:
        cell = CellResult(kind=kind, w_in=w_in, w_out=w_out,
                          measured_test_seconds=measured_s)
        result.cells.append(cell)
        try:
            if kind == PERSISTENCE:
                model = PersistenceModel(w_in, w_out)
            else:
                seed = _cell_seed(cfg.seed, "trial", w_in, w_out, kind)
                spec = ModelSpec(ModelKind(kind), w_in, w_out, hidden=cfg.hidden,
                                 dropout_enabled=cfg.dropout_enabled)
                model = build(spec, derive_seed(seed, "init"))
                tc = train_config_for(ModelKind(kind), "trial", cfg,
                                      derive_seed(seed, "fit"))
                cell.history = fit(model, train, val, tc)
                cell.train_seconds = cell.history.train_seconds
                cell.model = model
            t0 = time.perf_counter()
            preds = model.forward(test.X)
            cell.predict_seconds = time.perf_counter() - t0
            cell.record = compute_metrics(
                test.Y, preds, model=kind, w_in=w_in, w_out=w_out,
                participant_id=trial.participant_id, trial_id=trial.trial_id)
            # per-step series over the test region, for the overlay plot
            P = np.zeros_like(test_vals)
            valid = np.zeros(len(test_vals), dtype=bool)
            P[w_in:w_in + len(preds)] = preds[:, 0]
            valid[w_in:w_in + len(preds)] = True
            cell.prediction = TrialPrediction(P, valid, cell.predict_seconds)
            cell.true_values = test_vals
        except Exception as exc:  # noqa: BLE001 - a failed kind must not abort the rest
            cell.error = f"{type(exc).__name__}: {exc}"
    return result


# ---------------------------------------------------------------------------
# by participant


def resolve_holdouts(n_trials: int, cfg: ExperimentConfig) -> tuple:
    """Default allocation: last trial tests, second-to-last validates."""
    test_idx = cfg.test_trial_index if cfg.test_trial_index is not None else n_trials - 1
    val_idx = cfg.val_trial_index if cfg.val_trial_index is not None else n_trials - 2
    return test_idx, val_idx


def run_by_participant(trials: list, cfg: ExperimentConfig) -> ExperimentResult:
    """Long-distance protocol over one participant's trials: fit per grid
    cell and predict the entire held-out trial from measured inputs."""
    if len(trials) < 3:
        raise ValueError(f"needs >= 3 trials, got {len(trials)}")
    test_idx, val_idx = resolve_holdouts(len(trials), cfg)
    participant_id = trials[0].participant_id
    test_trial = trials[test_idx]
    measured_s = len(test_trial) * test_trial.sample_period_ms / 1000.0

    result = ExperimentResult("participant", participant_id,
                              test_trial_id=test_trial.trial_id,
                              val_trial_id=trials[val_idx].trial_id)
    kinds = [k.value for k in cfg.model_kinds]
    if cfg.include_baseline:
        kinds.append(PERSISTENCE)

    for (w_in, w_out) in cfg.grid:
        try:
            train, val, _test, normalizer = assemble_by_participant(
                trials, test_idx, val_idx, w_in, w_out,
                scale_to_unit=cfg.normalization == "unit")
            test_vals = normalize_values(test_trial.values, normalizer)
        except Exception as exc:  # noqa: BLE001
            for kind in kinds:
                result.cells.append(CellResult(
                    kind=kind, w_in=w_in, w_out=w_out,
                    error=f"{type(exc).__name__}: {exc}"))
            continue
        for kind in kinds:
            cell = CellResult(kind=kind, w_in=w_in, w_out=w_out,
                              measured_test_seconds=measured_s)
            result.cells.append(cell)
            try:
                if kind == PERSISTENCE:
                    model = PersistenceModel(w_in, w_out)
                else:
                    seed = _cell_seed(cfg.seed, "participant", w_in, w_out, kind)
                    spec = ModelSpec(ModelKind(kind), w_in, w_out,
                                     hidden=cfg.hidden,
                                     dropout_enabled=cfg.dropout_enabled)
                    model = build(spec, derive_seed(seed, "init"))
                    tc = train_config_for(ModelKind(kind), "participant", cfg,
                                          derive_seed(seed, "fit"))
                    cell.history = fit(model, train, val, tc)
                    cell.train_seconds = cell.history.train_seconds
                    cell.model = model
                pred = predict_trial(model, test_vals, w_in, w_out,
                                     mode=cfg.stitch_mode)
                cell.prediction = pred
                cell.predict_seconds = pred.predict_seconds
                cell.true_values = test_vals
                cell.record = compute_metrics(
                    test_vals, pred.values, mask=pred.valid,
                    model=kind, w_in=w_in, w_out=w_out,
                    participant_id=participant_id,
                    trial_id=test_trial.trial_id)
            except Exception as exc:  # noqa: BLE001
                cell.error = f"{type(exc).__name__}: {exc}"
    return result


# ---------------------------------------------------------------------------
# Timing benchmark


def benchmark_timing(trials: list, cfg: ExperimentConfig,
                     repetitions: int = 100) -> list:
    """Train once per kind, repeat prediction, and compare prediction time
    against the time the data takes to generate (steps x sample period).

    Returns one row per kind:
    (kind, w_in, w_out, train_s, predict_s, measured_test_s, ratio).
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if cfg.protocol == "trial":
        result = run_by_trial(trials[0], cfg)
    else:
        run_cfg = ExperimentConfig(**{**cfg.__dict__, "grid": (cfg.grid[0],)})
        result = run_by_participant(trials, run_cfg)

    rows = []
    for cell in result.cells:
        if not cell.ok:
            continue
        model = cell.model if cell.model is not None else PersistenceModel(
            cell.w_in, cell.w_out)
        values = cell.true_values
        times = []
        for _ in range(repetitions):
            pred = predict_trial(model, values, cell.w_in, cell.w_out,
                                 mode=cfg.stitch_mode)
            times.append(pred.predict_seconds)
        mean_predict = float(np.mean(times))
        ratio = mean_predict / cell.measured_test_seconds
        rows.append((cell.kind, cell.w_in, cell.w_out, cell.train_seconds,
                     mean_predict, cell.measured_test_seconds, ratio))
    return rows


def write_timing_csv(rows, path, metadata: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for key, value in (metadata or {}).items():
            fh.write(f"# {key}={value}\n")
        fh.write("model,w_in,w_out,train_s,predict_s,measured_test_s,"
                 "predict_generation_ratio\n")
        for kind, w_in, w_out, train_s, predict_s, measured_s, ratio in rows:
            fh.write(f"{kind},{w_in},{w_out},{train_s:.6f},{predict_s:.6f},"
                     f"{measured_s:.6f},{ratio:.6f}\n")


# ---------------------------------------------------------------------------
# Results directory


def write_results_dir(outdir, result: ExperimentResult,
                      cfg: ExperimentConfig) -> list:
    """Emit report.csv, timing.csv and per-cell history/plot/model files.

    report.csv carries the run metadata as comment lines and contains no
    timing values, so reruns with the same seed are byte-identical.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    artifacts = []

    metadata = cfg.metadata()
    metadata["participant"] = result.participant_id
    metadata["test_trial"] = result.test_trial_id
    if result.val_trial_id:
        metadata["val_trial"] = result.val_trial_id
    for label, err in sorted(result.errors.items()):
        metadata[f"error_{label}"] = err

    report_path = outdir / "report.csv"
    if result.records:
        write_report_csv(aggregate(result.records), report_path, metadata)
    else:
        write_report_csv([], report_path, metadata)
    artifacts.append(report_path)

    timing_rows = [
        (c.kind, c.w_in, c.w_out, c.train_seconds, c.predict_seconds,
         c.measured_test_seconds,
         c.predict_seconds / c.measured_test_seconds if c.measured_test_seconds else 0.0)
        for c in result.cells if c.ok
    ]
    timing_path = outdir / "timing.csv"
    write_timing_csv(timing_rows, timing_path, metadata)
    artifacts.append(timing_path)

    for cell in result.cells:
        if not cell.ok:
            continue
        if cell.history is not None:
            hist_path = outdir / f"history_{cell.label}.csv"
            cell.history.write_csv(hist_path)
            artifacts.append(hist_path)
        if cell.prediction is not None and cell.true_values is not None:
            true_s = summed_series(cell.true_values)
            pred_s = summed_series(cell.prediction.values, cell.prediction.valid)
            csv_path, svg_path = emit_plot(
                true_s, pred_s, outdir / f"plot_{cell.label}",
                title=f"{result.participant_id} {cell.label}")
            artifacts.extend([csv_path, svg_path])
        if cell.model is not None:
            model_path = outdir / f"model_{cell.label}.bin"
            save_model(cell.model, model_path)
            artifacts.append(model_path)
    return artifacts
