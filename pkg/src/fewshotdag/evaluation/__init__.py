"""Landmark error metrics, overlays and result reports."""

from .metrics import (
    aggregate_by_method,
    euclidean_errors,
    evaluate_model,
    summarize,
)
from .overlay import emit_overlay
from .report import emit_report, format_table, read_report

__all__ = [
    "aggregate_by_method",
    "emit_overlay",
    "emit_report",
    "euclidean_errors",
    "evaluate_model",
    "format_table",
    "read_report",
    "summarize",
]
