import math

import numpy as np
import pandas as pd
import pytest

from adhocsep.danse import SeparationConfig, run_separation
from adhocsep.errors import AggregationError, EvaluationError, FormatError, MetricError
from adhocsep.evaluation import (
    MetricsRecord,
    aggregate,
    evaluate_scene,
    plot_data,
    read_metrics_csv,
    si_sdr,
    si_sdr_matrix,
    unassociated_nodes,
    write_metrics_csv,
    write_plot_data,
    write_summary_csv,
)
from adhocsep.evaluation.metrics import SI_SDR_CAP_DB


def record(delta: float, scene: str = "s", node: int = 0, n: int = 2, k: int = 2) -> MetricsRecord:
    return MetricsRecord(scene, node, "oracle-irm", n, k, 0.0, delta, delta, None)


def test_si_sdr_of_orthogonal_error() -> None:
    assert si_sdr(np.array([1.0, 1.0]), np.array([1.0, 0.0])) == pytest.approx(0.0)
    assert si_sdr(np.array([2.0, 1.0]), np.array([1.0, 0.0])) == pytest.approx(10 * math.log10(4.0))


def test_si_sdr_cap_and_floor(rng: np.random.Generator) -> None:
    x = rng.standard_normal(1000)
    assert si_sdr(x, x) == SI_SDR_CAP_DB
    assert si_sdr(3.0 * x, x) == SI_SDR_CAP_DB
    y = np.zeros(1000)
    y[::2] = 1.0
    z = np.zeros(1000)
    z[1::2] = 1.0
    assert si_sdr(z, y) == -SI_SDR_CAP_DB


def test_si_sdr_is_scale_invariant(rng: np.random.Generator) -> None:
    x = rng.standard_normal(4000)
    estimate = x + 0.3 * rng.standard_normal(4000)
    reference = si_sdr(estimate, x)
    for c in (0.01, 5.0, -2.0):
        assert si_sdr(c * estimate, x) == pytest.approx(reference, abs=1e-9)
    assert si_sdr(estimate, 7.0 * x) == pytest.approx(reference, abs=1e-9)


def test_si_sdr_of_silent_estimate(rng: np.random.Generator) -> None:
    x = rng.standard_normal(1000)
    assert si_sdr(np.zeros(1000), x) == -SI_SDR_CAP_DB
    noise = rng.standard_normal(1000)
    assert si_sdr(1e-200 * noise, x) == pytest.approx(si_sdr(noise, x), abs=1e-9)
    assert si_sdr(1e-200 * noise, x) < 0


def test_si_sdr_at_extreme_scales(rng: np.random.Generator) -> None:
    x = rng.standard_normal(4000)
    estimate = x + 0.3 * rng.standard_normal(4000)
    reference = si_sdr(estimate, x)
    for c in (1e-300, 1e-160, 1e160, 1e300):
        value = si_sdr(c * estimate, x)
        assert math.isfinite(value)
        assert value == pytest.approx(reference, abs=1e-9)
        assert si_sdr(estimate, c * x) == pytest.approx(reference, abs=1e-9)


def test_si_sdr_matches_explicit_projection(rng: np.random.Generator) -> None:
    x = rng.standard_normal(500)
    estimate = 0.5 * x + rng.standard_normal(500)
    alpha = sum(a * b for a, b in zip(estimate, x)) / sum(b * b for b in x)
    target = alpha * x
    expected = 10 * math.log10(np.sum(target**2) / np.sum((target - estimate) ** 2))
    assert si_sdr(estimate, x) == pytest.approx(expected)


def test_si_sdr_errors() -> None:
    with pytest.raises(MetricError):
        si_sdr(np.ones(10), np.zeros(10))
    with pytest.raises(FormatError):
        si_sdr(np.ones(10), np.ones(11))


def test_si_sdr_matrix(rng: np.random.Generator) -> None:
    a, b = rng.standard_normal((2, 300))
    matrix = si_sdr_matrix([a, b], [a, b])
    assert matrix.shape == (2, 2)
    assert matrix[0, 0] == SI_SDR_CAP_DB
    assert matrix[1, 0] < 0


def test_aggregate_confidence_interval() -> None:
    records = [record(1.0 if i % 2 else -1.0, f"s{i}") for i in range(100)]
    summary = aggregate(records)
    row = summary.row(n_sources=2, n_nodes=2, method="oracle-irm")
    assert row["count"] == 100
    assert row["mean_delta_db"] == pytest.approx(0.0, abs=1e-12)
    assert row["ci_delta_db"] == pytest.approx(1.96 * 1.00504 / 10, rel=1e-4)
    assert math.isnan(row["mean_si_sdr_compressed_db"])


def test_aggregate_single_record_and_groups() -> None:
    records = [record(3.0, n=2), record(1.0, n=3), record(2.0, "t", n=3)]
    summary = aggregate(records)
    assert list(summary.table["n_sources"]) == [2, 3]
    single = summary.row(n_sources=2)
    assert single["mean_delta_db"] == 3.0
    assert single["ci_delta_db"] == 0.0
    pair = summary.row(n_sources=3)
    assert pair["mean_delta_db"] == pytest.approx(1.5)
    assert pair["ci_delta_db"] == pytest.approx(1.96 * math.sqrt(0.5) / math.sqrt(2))


def test_aggregate_errors() -> None:
    with pytest.raises(AggregationError):
        aggregate([])
    with pytest.raises(AggregationError):
        aggregate([record(1.0)], grouping=("room",))
    with pytest.raises(AggregationError):
        aggregate([record(1.0), record(2.0, n=3)]).row(n_nodes=2)


def test_metrics_and_summary_files(tmp_path) -> None:
    records = [record(1.0, "a"), record(2.0, "b", node=1)]
    path = str(tmp_path / "results" / "metrics.csv")
    write_metrics_csv(records, path)
    assert read_metrics_csv(path) == records

    summary = aggregate(records)
    write_summary_csv(summary, str(tmp_path / "results" / "summary.csv"))
    table = pd.read_csv(tmp_path / "results" / "summary.csv")
    assert table.loc[0, "mean_delta_db"] == pytest.approx(1.5)

    frame = plot_data(summary)
    assert list(frame.columns) == ["condition", "mean", "err"]
    assert frame.loc[0, "condition"] == "n_sources=2,n_nodes=2,method=oracle-irm"
    write_plot_data(summary, str(tmp_path / "results" / "plot_data.csv"))
    assert (tmp_path / "results" / "plot_data.csv").exists()
    with pytest.raises(AggregationError):
        plot_data(summary, "pesq")


def test_evaluate_scene(make_recording) -> None:
    recording = make_recording(2, 3)
    output = run_separation(recording, SeparationConfig())
    records = evaluate_scene(output, recording)
    assert [r.node_id for r in records] == [0, 1]
    assert unassociated_nodes(output) == [2]
    for r in records:
        assert r.delta_db == pytest.approx(r.si_sdr_out_db - r.si_sdr_in_db)
        assert r.si_sdr_in_db == pytest.approx(
            si_sdr(recording.mixture[r.node_id][0], recording.images[r.node_id][0, r.node_id])
        )
        assert r.n_sources == 2 and r.n_nodes == 3
        assert r.si_sdr_compressed_db is not None
        assert r.delta_db > 0


def test_evaluate_scene_rejects_other_recording(make_recording) -> None:
    output = run_separation(make_recording(2, 3), SeparationConfig())
    with pytest.raises(EvaluationError):
        evaluate_scene(output, make_recording(2, 2))


if __name__ == "__main__":
    test_aggregate_confidence_interval()
