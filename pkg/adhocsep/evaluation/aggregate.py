import logging
import os
from collections.abc import Sequence
from dataclasses import dataclass, fields

import numpy as np
import pandas as pd

from adhocsep.errors import AggregationError

from .scene_evaluator import MetricsRecord

logger = logging.getLogger(__name__)

DEFAULT_GROUPING = ("n_sources", "n_nodes", "method")
Z_95 = 1.96


@dataclass(frozen=True, eq=False)
class Summary:
    """Per-condition statistics, one row per group, sorted by the grouping keys.

    Columns: the grouping keys, `count`, and for each of `si_sdr_in_db`, `si_sdr_out_db`,
    `delta_db` and `si_sdr_compressed_db` a `mean_*` and a `ci_*` (95% half-width) column.
    """

    table: pd.DataFrame
    grouping: tuple[str, ...]

    def row(self, **keys: object) -> pd.Series:
        selected = self.table
        for key, value in keys.items():
            selected = selected[selected[key] == value]
        if len(selected) != 1:
            raise AggregationError(f"{len(selected)} rows match {keys}")
        return selected.iloc[0]


def records_to_frame(records: Sequence[MetricsRecord]) -> pd.DataFrame:
    columns = [f.name for f in fields(MetricsRecord)]
    return pd.DataFrame([r.to_dict() for r in records], columns=columns)


def aggregate(
    records: Sequence[MetricsRecord], grouping: Sequence[str] = DEFAULT_GROUPING
) -> Summary:
    """Means and normal-approximation 95% confidence half-widths per condition.

    The half-width is `1.96 * std / sqrt(n)` with the sample standard deviation; a group
    with a single record gets 0.

    Args:
        records (Sequence[MetricsRecord]): Records to summarize.
        grouping (Sequence[str], optional): Record fields defining a condition.

    Returns:
        Summary: One row per condition.

    Raises:
        AggregationError: There are no records or a grouping key is not a record field.
    """
    if not records:
        raise AggregationError("Cannot aggregate an empty set of records")
    frame = records_to_frame(records)
    grouping = tuple(grouping)
    unknown = [key for key in grouping if key not in frame.columns]
    if unknown:
        raise AggregationError(f"Unknown grouping keys {unknown}")

    metrics = ["si_sdr_in_db", "si_sdr_out_db", "delta_db", "si_sdr_compressed_db"]
    frame[metrics] = frame[metrics].astype(np.float64)
    grouped = frame.groupby(list(grouping), sort=True)
    table = grouped.size().rename("count").to_frame()
    for metric in metrics:
        stats = grouped[metric].agg(["mean", "std", "count"])
        table[f"mean_{metric}"] = stats["mean"]
        half_width = Z_95 * stats["std"] / np.sqrt(stats["count"])
        table[f"ci_{metric}"] = half_width.where(stats["count"] > 1, 0.0).fillna(0.0)
    return Summary(table.reset_index(), grouping)


def write_metrics_csv(records: Sequence[MetricsRecord], path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    records_to_frame(records).to_csv(path, index=False)


def read_metrics_csv(path: str) -> list[MetricsRecord]:
    frame = pd.read_csv(path, dtype={"scene_id": str, "method": str})
    records = []
    for row in frame.to_dict(orient="records"):
        compressed = row.get("si_sdr_compressed_db")
        records.append(
            MetricsRecord(
                scene_id=row["scene_id"],
                node_id=int(row["node_id"]),
                method=row["method"],
                n_sources=int(row["n_sources"]),
                n_nodes=int(row["n_nodes"]),
                si_sdr_in_db=float(row["si_sdr_in_db"]),
                si_sdr_out_db=float(row["si_sdr_out_db"]),
                delta_db=float(row["delta_db"]),
                si_sdr_compressed_db=None if pd.isna(compressed) else float(compressed),
            )
        )
    return records


def write_summary_csv(summary: Summary, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    summary.table.to_csv(path, index=False, float_format="%.6f")


def plot_data(summary: Summary, metric: str = "delta_db") -> pd.DataFrame:
    """Bar-plot table with columns `condition`, `mean` and `err`."""
    if f"mean_{metric}" not in summary.table.columns:
        raise AggregationError(f"Unknown metric {metric!r}")
    conditions = summary.table[list(summary.grouping)].apply(
        lambda row: ",".join(f"{key}={row[key]}" for key in summary.grouping), axis=1
    )
    return pd.DataFrame(
        {
            "condition": conditions,
            "mean": summary.table[f"mean_{metric}"],
            "err": summary.table[f"ci_{metric}"],
        }
    )


def write_plot_data(summary: Summary, path: str, metric: str = "delta_db") -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    plot_data(summary, metric).to_csv(path, index=False, float_format="%.6f")
