"""Gait pressure data model: trials, CSV ingestion, truncation,
offset/unit normalization, window generation, and the two split protocols.

A trial is one recorded walk: a (T, 6) array of force readings, one row per
8 ms sample, one column per pressure sensor.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

N_CHANNELS = 6
CHANNEL_LABELS = ("fsr8", "fsr9", "fsr10", "fsr11", "fsr12", "fsr13")
TRIAL_CSV_HEADER = ("t",) + CHANNEL_LABELS


class DataError(ValueError):
    """Raised for malformed input data or infeasible preprocessing."""


@dataclass
class Trial:
    """One recording: (T, 6) pressure readings sampled every sample_period_ms."""

    participant_id: str
    trial_id: str
    values: np.ndarray
    sample_period_ms: float = 8.0
    channel_labels: tuple = CHANNEL_LABELS

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != N_CHANNELS:
            raise DataError(
                f"trial values must be (T, {N_CHANNELS}), got {self.values.shape}"
            )
        if len(self.values) < 1:
            raise DataError("trial must contain at least one time step")
        if not np.all(np.isfinite(self.values)):
            raise DataError("trial contains non-finite values")
        if self.sample_period_ms <= 0:
            raise DataError("sample_period_ms must be positive")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def duration_s(self) -> float:
        return len(self.values) * self.sample_period_ms / 1000.0

    def replace_values(self, values: np.ndarray) -> "Trial":
        return Trial(
            participant_id=self.participant_id,
            trial_id=self.trial_id,
            values=values,
            sample_period_ms=self.sample_period_ms,
            channel_labels=self.channel_labels,
        )


@dataclass
class NormalizationParams:
    """Per-channel minima/ranges, fit from training data only."""

    per_channel_min: np.ndarray
    per_channel_range: np.ndarray
    scale_to_unit: bool = False

    def __post_init__(self):
        self.per_channel_min = np.asarray(self.per_channel_min, dtype=np.float64)
        self.per_channel_range = np.asarray(self.per_channel_range, dtype=np.float64)
        if self.per_channel_min.shape != (N_CHANNELS,):
            raise DataError("per_channel_min must have 6 entries")
        if self.per_channel_range.shape != (N_CHANNELS,):
            raise DataError("per_channel_range must have 6 entries")
        if np.any(self.per_channel_range < 0):
            raise DataError("per-channel range must be >= 0")

    @property
    def mode(self) -> str:
        return "unit" if self.scale_to_unit else "offset"


@dataclass
class WindowedDataset:
    """Ordered (input window, target window) pairs that never span trials.

    X has shape (n, w_in, 6) and Y has shape (n, w_out, 6).
    """

    w_in: int
    w_out: int
    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.Y = np.asarray(self.Y, dtype=np.float64)
        if self.w_in < 1 or self.w_out < 1:
            raise DataError("window sizes must be >= 1")
        if self.X.shape[1:] != (self.w_in, N_CHANNELS):
            raise DataError(f"X windows must be ({self.w_in}, {N_CHANNELS})")
        if self.Y.shape[1:] != (self.w_out, N_CHANNELS):
            raise DataError(f"Y windows must be ({self.w_out}, {N_CHANNELS})")
        if len(self.X) != len(self.Y):
            raise DataError("X and Y must pair up")

    def __len__(self) -> int:
        return len(self.X)

    @property
    def pairs(self):
        return list(zip(self.X, self.Y))

    @staticmethod
    def empty(w_in: int, w_out: int) -> "WindowedDataset":
        return WindowedDataset(
            w_in,
            w_out,
            np.empty((0, w_in, N_CHANNELS)),
            np.empty((0, w_out, N_CHANNELS)),
        )

    @staticmethod
    def concatenate(parts: list) -> "WindowedDataset":
        if not parts:
            raise DataError("cannot concatenate zero datasets")
        w_in, w_out = parts[0].w_in, parts[0].w_out
        for p in parts:
            if p.w_in != w_in or p.w_out != w_out:
                raise DataError("window sizes differ between datasets")
        return WindowedDataset(
            w_in,
            w_out,
            np.concatenate([p.X for p in parts]),
            np.concatenate([p.Y for p in parts]),
        )


@dataclass
class SplitSpec:
    """Fractions of raw samples allocated to train/val/test, in time order."""

    train_fraction: float = 0.70
    val_fraction: float = 0.15
    test_fraction: float = 0.15

    def __post_init__(self):
        fracs = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(f <= 0 for f in fracs):
            raise DataError("split fractions must be positive")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise DataError("split fractions must sum to 1")


# ---------------------------------------------------------------------------
# CSV ingestion / emission


def load_trial(source, participant_id: str, trial_id: str,
               sample_period_ms: float = 8.0) -> Trial:
    """Parse a trial CSV (header t,fsr8..fsr13) from a path or text stream.

    Errors carry the 1-based line number of the offending row.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return load_trial(fh, participant_id, trial_id, sample_period_ms)

    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty file: no header row") from None
    if tuple(h.strip() for h in header) != TRIAL_CSV_HEADER:
        raise DataError(
            f"bad header at line 1: expected {','.join(TRIAL_CSV_HEADER)}"
        )

    rows = []
    prev_t = None
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(TRIAL_CSV_HEADER):
            raise DataError(f"wrong column count at line {lineno}")
        try:
            t = int(row[0])
            vals = [float(v) for v in row[1:]]
        except ValueError:
            raise DataError(f"non-numeric value at line {lineno}") from None
        if prev_t is not None and t <= prev_t:
            raise DataError(f"non-ascending time step at line {lineno}")
        prev_t = t
        if any(not math.isfinite(v) for v in vals):
            raise DataError(f"non-finite value at line {lineno}")
        if any(v < 0 for v in vals):
            raise DataError(f"negative pressure value at line {lineno}")
        rows.append(vals)

    if not rows:
        raise DataError("empty file: no data rows")
    return Trial(participant_id, trial_id, np.array(rows), sample_period_ms)


def emit_trial_csv(trial: Trial, destination) -> None:
    """Write a trial as CSV (LF endings, repr-precision floats).

    repr round-trips float64 exactly, so emit -> load is bit-exact.
    """
    if isinstance(destination, (str, Path)):
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            emit_trial_csv(trial, fh)
            return
    destination.write(",".join(TRIAL_CSV_HEADER) + "\n")
    for t, row in enumerate(trial.values):
        destination.write(str(t) + "," + ",".join(repr(float(v)) for v in row) + "\n")


def trial_csv_bytes(trial: Trial) -> bytes:
    buf = io.StringIO()
    emit_trial_csv(trial, buf)
    return buf.getvalue().encode("utf-8")


def load_manifest(path) -> list:
    """Read a dataset manifest CSV: participant_id,trial_id,path.

    Relative trial paths are resolved against the manifest's directory.
    """
    path = Path(path)
    entries = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError("empty manifest")
        if [h.strip() for h in header] != ["participant_id", "trial_id", "path"]:
            raise DataError("manifest header must be participant_id,trial_id,path")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"wrong column count at line {lineno}")
            trial_path = Path(row[2])
            if not trial_path.is_absolute():
                trial_path = path.parent / trial_path
            entries.append((row[0], row[1], trial_path))
    if not entries:
        raise DataError("manifest has no entries")
    return entries


def save_manifest(entries, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("participant_id,trial_id,path\n")
        for participant_id, trial_id, trial_path in entries:
            fh.write(f"{participant_id},{trial_id},{trial_path}\n")


# ---------------------------------------------------------------------------
# Truncation


def truncate_manual(trial: Trial, start_step: int, end_step: int) -> Trial:
    """Keep only steps [start_step, end_step)."""
    if not (0 <= start_step < end_step <= len(trial)):
        raise DataError(
            f"invalid truncation range [{start_step}, {end_step}) "
            f"for trial of length {len(trial)}"
        )
    return trial.replace_values(trial.values[start_step:end_step])


def truncate_auto(trial: Trial, window_len: int = 50,
                  variance_threshold: float = 1e-4) -> Trial:
    """Trim flat lead-in/lead-out using rolling variance of the channel sum.

    Keeps the span from the first to the last window whose variance exceeds
    the threshold; errors if no window does.
    """
    if window_len < 2:
        raise DataError("window_len must be >= 2")
    total = trial.values.sum(axis=1)
    T = len(total)
    if T < window_len:
        raise DataError("trial shorter than the variance window")
    # Rolling mean/variance over [i, i+window_len) via cumulative sums.
    c1 = np.concatenate([[0.0], np.cumsum(total)])
    c2 = np.concatenate([[0.0], np.cumsum(total * total)])
    n = float(window_len)
    s1 = c1[window_len:] - c1[:-window_len]
    s2 = c2[window_len:] - c2[:-window_len]
    var = np.maximum(s2 / n - (s1 / n) ** 2, 0.0)
    active = np.nonzero(var > variance_threshold)[0]
    if len(active) == 0:
        raise DataError("no active region found")
    first = int(active[0])
    last = int(active[-1]) + window_len
    return trial.replace_values(trial.values[first:last])


# ---------------------------------------------------------------------------
# Normalization


def fit_normalizer(training_values: np.ndarray,
                   scale_to_unit: bool = False) -> NormalizationParams:
    """Per-channel min and range of the training data."""
    values = np.asarray(training_values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != N_CHANNELS or len(values) == 0:
        raise DataError("training values must be a non-empty (T, 6) array")
    mins = values.min(axis=0)
    ranges = values.max(axis=0) - mins
    return NormalizationParams(mins, ranges, scale_to_unit)


def normalize_values(values: np.ndarray, params: NormalizationParams) -> np.ndarray:
    """Apply offset (or unit-scale) normalization to a (T, 6) array.

    Offset mode shifts each channel so its minimum equals the training
    minimum. Unit mode additionally maps by (v - train_min) / train_range;
    zero-range channels map to constant 0.
    """
    values = np.asarray(values, dtype=np.float64)
    offset = params.per_channel_min - values.min(axis=0)
    shifted = values + offset
    if not params.scale_to_unit:
        return shifted
    out = np.zeros_like(shifted)
    nz = params.per_channel_range > 0
    out[:, nz] = (shifted[:, nz] - params.per_channel_min[nz]) / params.per_channel_range[nz]
    return out


def apply_normalizer(trial: Trial, params: NormalizationParams) -> Trial:
    return trial.replace_values(normalize_values(trial.values, params))


# ---------------------------------------------------------------------------
# Windowing and splits


def make_windows(values: np.ndarray, w_in: int, w_out: int,
                 stride: int = 1) -> WindowedDataset:
    """Slice a (T, 6) sequence into (input, target) window pairs.

    Pair s covers X = steps [s, s+w_in) and Y = [s+w_in, s+w_in+w_out), for
    s = 0, stride, 2*stride, ... while the pair fits. Too-short input yields
    an empty dataset.
    """
    if w_in < 1 or w_out < 1 or stride < 1:
        raise DataError("w_in, w_out and stride must be >= 1")
    values = np.asarray(values, dtype=np.float64)
    T = len(values)
    starts = range(0, max(T - w_in - w_out, -1) + 1, stride)
    X = np.stack([values[s:s + w_in] for s in starts]) if len(starts) else None
    if X is None:
        return WindowedDataset.empty(w_in, w_out)
    Y = np.stack([values[s + w_in:s + w_in + w_out] for s in starts])
    return WindowedDataset(w_in, w_out, X, Y)


def split_boundaries(T: int, w_in: int, w_out: int,
                     spec: SplitSpec) -> tuple:
    """Raw-sample counts (n_train, n_val, n_test) for a contiguous split.

    Test gets at least ceil(test_fraction * T); val targets
    round(val_fraction * T); train keeps the remainder (at or slightly
    below train_fraction * T). Regions too short to hold one window are
    grown to w_in + w_out at train's expense; if train then cannot hold a
    window itself the split is infeasible.
    """
    min_region = w_in + w_out
    n_val = max(round(spec.val_fraction * T), min_region)
    n_test = max(
        math.ceil(spec.test_fraction * T),
        T - round(spec.val_fraction * T) - math.floor(spec.train_fraction * T),
        min_region,
    )
    n_train = T - n_val - n_test
    if n_train < min_region:
        raise DataError(
            f"trial of length {T} too short to give each region one "
            f"({w_in}+{w_out})-step window"
        )
    return n_train, n_val, n_test


def split_by_trial(trial: Trial, w_in: int, w_out: int,
                   spec: SplitSpec = SplitSpec()) -> tuple:
    """Split one trial into train/val/test windows (contiguous, in time
    order, windowed independently so no window crosses a region boundary)."""
    n_train, n_val, n_test = split_boundaries(len(trial), w_in, w_out, spec)
    v = trial.values
    train = make_windows(v[:n_train], w_in, w_out)
    val = make_windows(v[n_train:n_train + n_val], w_in, w_out)
    test = make_windows(v[n_train + n_val:], w_in, w_out)
    return train, val, test


def assemble_by_participant(trials, test_index: int, val_index: int,
                            w_in: int, w_out: int,
                            scale_to_unit: bool = False) -> tuple:
    """Build the long-distance datasets from one participant's trials.

    One trial is held out for testing and one for validation; the rest are
    windowed independently, then concatenated. The normalizer is fit on the
    union of training-trial values and applied to all three sets.

    Returns (train, val, test, normalizer).
    """
    trials = list(trials)
    if len(trials) < 3:
        raise DataError("need at least 3 trials (train/val/test)")
    n = len(trials)
    if not (0 <= test_index < n and 0 <= val_index < n):
        raise DataError("trial index out of range")
    if test_index == val_index:
        raise DataError("test and validation trials must differ")

    train_trials = [t for i, t in enumerate(trials)
                    if i not in (test_index, val_index)]
    params = fit_normalizer(
        np.concatenate([t.values for t in train_trials]), scale_to_unit
    )
    train_parts = [
        make_windows(normalize_values(t.values, params), w_in, w_out)
        for t in train_trials
    ]
    train = WindowedDataset.concatenate(train_parts)
    val = make_windows(
        normalize_values(trials[val_index].values, params), w_in, w_out
    )
    test = make_windows(
        normalize_values(trials[test_index].values, params), w_in, w_out
    )
    return train, val, test, params
