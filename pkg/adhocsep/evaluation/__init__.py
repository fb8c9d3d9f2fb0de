from .aggregate import (
    Summary,
    aggregate,
    plot_data,
    read_metrics_csv,
    records_to_frame,
    write_metrics_csv,
    write_plot_data,
    write_summary_csv,
)
from .metrics import si_sdr, si_sdr_matrix
from .scene_evaluator import MetricsRecord, evaluate_scene, unassociated_nodes

__all__ = [
    "Summary",
    "aggregate",
    "plot_data",
    "read_metrics_csv",
    "records_to_frame",
    "write_metrics_csv",
    "write_plot_data",
    "write_summary_csv",
    "si_sdr",
    "si_sdr_matrix",
    "MetricsRecord",
    "evaluate_scene",
    "unassociated_nodes",
]
