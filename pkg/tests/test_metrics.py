import math

import numpy as np
import pytest

from gaitpred.metrics import (
    MetricsRecord,
    SummedSeries,
    aggregate,
    compute_metrics,
    emit_plot,
    summed_series,
    write_report_csv,
)
from gaitpred.rng import SplitMix64


def test_perfect_prediction():
    Y = SplitMix64(1).normal(60).reshape(10, 6)
    rec = compute_metrics(Y, Y)
    assert (rec.mae, rec.mse, rec.rmse) == (0.0, 0.0, 0.0)
    assert rec.n == 60


def test_worked_example():
    y = np.array([1.0, 2.0, 3.0])
    yhat = np.array([2.0, 2.0, 5.0])
    rec = compute_metrics(y, yhat)
    assert rec.mae == pytest.approx(1.0)
    assert rec.mse == pytest.approx(1.6667, abs=1e-4)
    assert rec.rmse == pytest.approx(1.2910, abs=1e-4)


def test_rmse_is_sqrt_mse():
    rng = SplitMix64(2)
    for _ in range(50):
        Y = rng.normal(30).reshape(5, 6)
        P = rng.normal(30).reshape(5, 6)
        rec = compute_metrics(Y, P)
        assert abs(rec.rmse ** 2 - rec.mse) <= 1e-12 * max(rec.mse, 1.0)
        assert rec.mae <= rec.rmse + 1e-12


def test_metrics_match_bruteforce_loop():
    rng = SplitMix64(3)
    for _ in range(20):
        Y = rng.normal(120).reshape(20, 6)
        P = rng.normal(120).reshape(20, 6)
        rec = compute_metrics(Y, P)
        abs_sum = 0.0
        sq_sum = 0.0
        count = 0
        for t in range(20):
            for c in range(6):
                d = P[t, c] - Y[t, c]
                abs_sum += abs(d)
                sq_sum += d * d
                count += 1
        assert rec.mae == pytest.approx(abs_sum / count, rel=1e-12)
        assert rec.mse == pytest.approx(sq_sum / count, rel=1e-12)
        assert rec.rmse == pytest.approx(math.sqrt(sq_sum / count), rel=1e-12)


def test_mask_restricts_scoring():
    Y = np.zeros((4, 6))
    P = np.ones((4, 6))
    mask = np.array([False, True, True, False])
    rec = compute_metrics(Y, P, mask)
    assert rec.n == 12
    assert rec.mae == 1.0
    with pytest.raises(ValueError):
        compute_metrics(Y, P, np.zeros(4, dtype=bool))


def test_scale_property():
    rng = SplitMix64(4)
    Y = rng.normal(60).reshape(10, 6)
    P = Y + rng.normal(60).reshape(10, 6)
    base = compute_metrics(Y, P)
    scaled = compute_metrics(Y, Y + 3.0 * (P - Y))
    assert scaled.mae == pytest.approx(3.0 * base.mae, rel=1e-12)
    assert scaled.rmse == pytest.approx(3.0 * base.rmse, rel=1e-12)
    assert scaled.mse == pytest.approx(9.0 * base.mse, rel=1e-12)


def test_metrics_record_invariants():
    with pytest.raises(ValueError):
        MetricsRecord(mae=1.0, mse=1.0, rmse=2.0, n=1)  # rmse^2 != mse
    with pytest.raises(ValueError):
        MetricsRecord(mae=2.0, mse=1.0, rmse=1.0, n=1)  # mae > rmse


# ---------------------------------------------------------------------------
# summed series


def test_summed_series_constant():
    vals = np.full((3, 6), 0.5)
    s = summed_series(vals)
    np.testing.assert_allclose(s.sums, [3.0, 3.0, 3.0])


def test_summed_series_single_channel():
    vals = np.zeros((4, 6))
    vals[:, 2] = np.arange(4.0)
    s = summed_series(vals)
    np.testing.assert_array_equal(s.sums, np.arange(4.0))


def test_summed_series_matches_bruteforce():
    vals = SplitMix64(5).uniform(50 * 6).reshape(50, 6)
    s = summed_series(vals)
    for t in range(50):
        assert s.sums[t] == pytest.approx(sum(vals[t]), rel=1e-15)


# ---------------------------------------------------------------------------
# aggregation


def rec(model, rmse, w_in=5, w_out=1):
    return MetricsRecord(mae=rmse / 2, mse=rmse ** 2, rmse=rmse, n=10,
                         model=model, w_in=w_in, w_out=w_out)


def test_single_record_aggregate():
    rows = aggregate([rec("bilstm", 0.2)])
    assert len(rows) == 1
    assert rows[0].mean_rmse == pytest.approx(0.2)
    assert rows[0].median_rmse == pytest.approx(0.2)
    assert rows[0].rank == 1


def test_aggregate_mean_median():
    rows = aggregate([rec("m", r) for r in (0.1, 0.2, 0.4)])
    assert rows[0].mean_rmse == pytest.approx(0.7 / 3)
    assert rows[0].median_rmse == pytest.approx(0.2)
    rows = aggregate([rec("m", r) for r in (0.1, 0.2, 0.4, 0.8)])
    assert rows[0].median_rmse == pytest.approx(0.3)  # even count: central mean


def test_aggregate_ranking_dominance():
    records = [rec("good", 0.1), rec("good", 0.2), rec("bad", 0.5), rec("bad", 0.6)]
    rows = aggregate(records)
    by_model = {r.model: r for r in rows}
    assert by_model["good"].rank == 1
    assert by_model["bad"].rank == 2


def test_aggregate_permutation_invariant():
    records = [rec("a", 0.3), rec("b", 0.1), rec("a", 0.5), rec("b", 0.2)]
    rows1 = aggregate(records)
    rows2 = aggregate(records[::-1])
    assert [(r.model, r.mean_rmse, r.rank) for r in rows1] == \
           [(r.model, r.mean_rmse, r.rank) for r in rows2]


def test_aggregate_empty_errors():
    with pytest.raises(ValueError):
        aggregate([])


def test_report_csv_format(tmp_path):
    rows = aggregate([rec("a", 0.3), rec("b", 0.1)])
    path = tmp_path / "report.csv"
    write_report_csv(rows, path, {"seed": 1})
    lines = path.read_text().splitlines()
    assert lines[0] == "# seed=1"
    assert lines[1] == "model,w_in,w_out,mean_mae,mean_mse,mean_rmse,median_rmse,n,rank"
    assert len(lines) == 4


# ---------------------------------------------------------------------------
# plots


def test_emit_plot_identical_series(tmp_path):
    vals = SplitMix64(6).uniform(20 * 6).reshape(20, 6)
    s = summed_series(vals)
    csv_path, svg_path = emit_plot(s, s, tmp_path / "plot")
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "t,true_sum,pred_sum"
    assert len(lines) == 21
    for line in lines[1:]:
        _, a, b = line.split(",")
        assert a == b
    assert svg_path.read_text().startswith("<svg")


def test_emit_plot_row_count(tmp_path):
    vals = SplitMix64(7).uniform(1250 * 6).reshape(1250, 6)
    s = summed_series(vals)
    csv_path, _ = emit_plot(s, s, tmp_path / "plot")
    assert len(csv_path.read_text().splitlines()) == 1251


def test_emit_plot_masked_prefix(tmp_path):
    vals = SplitMix64(8).uniform(30 * 6).reshape(30, 6)
    true_s = summed_series(vals)
    mask = np.ones(30, dtype=bool)
    mask[:5] = False
    pred_s = summed_series(vals, mask)
    csv_path, _ = emit_plot(true_s, pred_s, tmp_path / "plot")
    lines = csv_path.read_text().splitlines()[1:]
    for t, line in enumerate(lines):
        pred_field = line.split(",")[2]
        assert (pred_field == "") == (t < 5)


def test_emit_plot_length_mismatch(tmp_path):
    a = SummedSeries(np.zeros(5), np.ones(5, dtype=bool))
    b = SummedSeries(np.zeros(6), np.ones(6, dtype=bool))
    with pytest.raises(ValueError):
        emit_plot(a, b, tmp_path / "plot")
