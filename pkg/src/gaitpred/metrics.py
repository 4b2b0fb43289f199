"""Evaluation metrics, summed-series construction, aggregation tables and
plot emission.

Metrics are always computed on the per-sensor, per-step values (never on
the summed series; the sum exists only for the overlay plots).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from statistics import median

import numpy as np

from .data import N_CHANNELS


@dataclass
class MetricsRecord:
    mae: float
    mse: float
    rmse: float
    n: int
    model: str = ""
    w_in: int = 0
    w_out: int = 0
    participant_id: str = ""
    trial_id: str = ""

    def __post_init__(self):
        if self.mae < 0 or self.mse < 0:
            raise ValueError("metrics must be non-negative")
        if abs(self.rmse * self.rmse - self.mse) > 1e-12 * max(self.mse, 1.0):
            raise ValueError("rmse must be the square root of mse")
        if self.mae > self.rmse + 1e-12:
            raise ValueError("mae cannot exceed rmse")


@dataclass
class SummedSeries:
    """Per-step sum across the six channels, with a validity mask."""

    sums: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.sums = np.asarray(self.sums, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.sums.shape != self.valid.shape:
            raise ValueError("sums and mask lengths differ")


def compute_metrics(Y_true: np.ndarray, Y_pred: np.ndarray,
                    mask: np.ndarray | None = None, **context) -> MetricsRecord:
    """MAE / MSE / RMSE over all valid elements jointly.

    Inputs are (..., 6) arrays of matching shape; `mask` selects valid
    leading entries (e.g. predicted time steps). All sensors and steps are
    pooled into one N.
    """
    Y_true = np.asarray(Y_true, dtype=np.float64)
    Y_pred = np.asarray(Y_pred, dtype=np.float64)
    if Y_true.shape != Y_pred.shape:
        raise ValueError(f"shape mismatch: {Y_true.shape} vs {Y_pred.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        Y_true = Y_true[mask]
        Y_pred = Y_pred[mask]
    if Y_true.size == 0:
        raise ValueError("no valid elements to score")
    diff = Y_pred - Y_true
    mae = float(np.mean(np.abs(diff)))
    mse = float(np.mean(diff * diff))
    return MetricsRecord(mae=mae, mse=mse, rmse=math.sqrt(mse),
                         n=diff.size, **context)


def summed_series(values: np.ndarray, mask: np.ndarray | None = None) -> SummedSeries:
    """Sum the six channels per step; invalid steps are carried in the mask."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != N_CHANNELS:
        raise ValueError(f"expected (T, {N_CHANNELS}) values")
    if mask is None:
        mask = np.ones(len(values), dtype=bool)
    return SummedSeries(values.sum(axis=1), mask)


# ---------------------------------------------------------------------------
# Aggregation


@dataclass
class ReportRow:
    model: str
    w_in: int
    w_out: int
    mean_mae: float
    mean_mse: float
    mean_rmse: float
    median_rmse: float
    n: int
    rank: int = 0


def aggregate(records) -> list:
    """Mean MAE/MSE/RMSE and median RMSE per (model, window config), plus a
    rank within each window config (1 = lowest mean RMSE = best)."""
    records = list(records)
    if not records:
        raise ValueError("no records to aggregate")
    groups = {}
    for r in records:
        groups.setdefault((r.model, r.w_in, r.w_out), []).append(r)
    rows = []
    for (model, w_in, w_out), rs in sorted(groups.items()):
        rows.append(ReportRow(
            model=model,
            w_in=w_in,
            w_out=w_out,
            mean_mae=float(np.mean([r.mae for r in rs])),
            mean_mse=float(np.mean([r.mse for r in rs])),
            mean_rmse=float(np.mean([r.rmse for r in rs])),
            median_rmse=float(median(r.rmse for r in rs)),
            n=len(rs),
        ))
    for (w_in, w_out) in {(row.w_in, row.w_out) for row in rows}:
        cell_rows = [row for row in rows if (row.w_in, row.w_out) == (w_in, w_out)]
        for rank, row in enumerate(
                sorted(cell_rows, key=lambda r: (r.mean_rmse, r.model)), 1):
            row.rank = rank
    return rows


def write_report_csv(rows, path, metadata: dict | None = None) -> None:
    """Report table with run metadata embedded as leading comment lines so
    a result is reproducible from the file alone."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for key, value in (metadata or {}).items():
            fh.write(f"# {key}={value}\n")
        fh.write("model,w_in,w_out,mean_mae,mean_mse,mean_rmse,median_rmse,n,rank\n")
        for r in rows:
            fh.write(
                f"{r.model},{r.w_in},{r.w_out},{r.mean_mae!r},{r.mean_mse!r},"
                f"{r.mean_rmse!r},{r.median_rmse!r},{r.n},{r.rank}\n"
            )


# ---------------------------------------------------------------------------
# Plot emission: CSV is the contract, SVG is cosmetic


def write_plot_csv(true_summed: SummedSeries, pred_summed: SummedSeries, path) -> None:
    if len(true_summed.sums) != len(pred_summed.sums):
        raise ValueError("true and predicted series lengths differ")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,true_sum,pred_sum\n")
        for t in range(len(true_summed.sums)):
            true_v = repr(float(true_summed.sums[t])) if true_summed.valid[t] else ""
            pred_v = repr(float(pred_summed.sums[t])) if pred_summed.valid[t] else ""
            fh.write(f"{t},{true_v},{pred_v}\n")


def _polyline(xs, ys, color: str) -> str:
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    return (f'<polyline fill="none" stroke="{color}" stroke-width="1" '
            f'points="{pts}"/>')


def write_plot_svg(true_summed: SummedSeries, pred_summed: SummedSeries, path,
                   title: str = "") -> None:
    """Standalone overlay of the summed true (blue) and predicted (red)
    series."""
    if len(true_summed.sums) != len(pred_summed.sums):
        raise ValueError("true and predicted series lengths differ")
    W, H, margin = 960, 320, 40
    T = len(true_summed.sums)
    both = np.concatenate([true_summed.sums[true_summed.valid],
                           pred_summed.sums[pred_summed.valid]])
    lo = float(both.min()) if both.size else 0.0
    hi = float(both.max()) if both.size else 1.0
    span = (hi - lo) or 1.0

    def sx(t):
        return margin + (W - 2 * margin) * (t / max(T - 1, 1))

    def sy(v):
        return H - margin - (H - 2 * margin) * ((v - lo) / span)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<line x1="{margin}" y1="{H - margin}" x2="{W - margin}" '
        f'y2="{H - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{H - margin}" '
        f'stroke="black"/>',
    ]
    for series, color in ((true_summed, "#1f4fd8"), (pred_summed, "#d8341f")):
        idx = np.nonzero(series.valid)[0]
        if idx.size:
            parts.append(_polyline([sx(t) for t in idx],
                                   [sy(series.sums[t]) for t in idx], color))
    if title:
        parts.append(f'<text x="{margin}" y="24" font-size="14">{title}</text>')
    parts.append(f'<text x="{W - margin - 180}" y="24" font-size="12" '
                 f'fill="#1f4fd8">true</text>')
    parts.append(f'<text x="{W - margin - 120}" y="24" font-size="12" '
                 f'fill="#d8341f">predicted</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def emit_plot(true_summed: SummedSeries, pred_summed: SummedSeries,
              base_path, title: str = "") -> tuple:
    """Write <base>.csv and <base>.svg; returns both paths."""
    base = Path(base_path)
    csv_path = base.with_suffix(".csv")
    svg_path = base.with_suffix(".svg")
    write_plot_csv(true_summed, pred_summed, csv_path)
    write_plot_svg(true_summed, pred_summed, svg_path, title)
    return csv_path, svg_path
