"""Result tables in JSON and plain text."""

from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from pathlib import Path

from ..exceptions import InvalidArgumentError
from ..models.metrics import ReportRow
from .metrics import aggregate_by_method, method_order

__all__ = [
    "REPORT_JSON",
    "REPORT_TEXT",
    "emit_report",
    "format_table",
    "read_report",
]

REPORT_JSON = "report.json"
REPORT_TEXT = "report.txt"
REPORT_VERSION = 1

_HEADER = (
    "Method",
    "Labeled",
    "Seed",
    "Mean (px)",
    "Std (px)",
    "Failure (%)",
)


def _sorted(rows: Sequence[ReportRow]) -> list[ReportRow]:
    return sorted(
        rows,
        key=lambda r: (method_order(r.method), r.labeled_count or 0, r.seed),
    )


def format_table(rows: Sequence[ReportRow]) -> str:
    """Render rows as an aligned plain-text table.

    Runs that did not converge show ``-`` instead of their metrics.
    """
    lines = [_HEADER]
    for row in _sorted(rows):
        if row.converged:
            summary = row.summary
            metrics = (
                f"{summary.mean:.2f}",
                f"{summary.std:.2f}",
                f"{100 * summary.failure_rate:.2f}",
            )
        else:
            metrics = ("-", "-", "-")
        labeled = "" if row.labeled_count is None else str(row.labeled_count)
        lines.append((row.method, labeled, str(row.seed), *metrics))
    widths = [max(len(line[i]) for line in lines) for i in range(len(_HEADER))]
    rendered = []
    for line in lines:
        cells = [line[0].ljust(widths[0])]
        cells.extend(c.rjust(w) for c, w in zip(line[1:], widths[1:]))
        rendered.append("  ".join(cells).rstrip())
    rendered.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(rendered) + "\n"


def emit_report(
    rows: Sequence[ReportRow], directory: Path
) -> tuple[Path, Path]:
    """Write ``report.json`` and ``report.txt``.

    Rows are ordered by strategy, in declaration order, then seed. The JSON
    file holds every value at full precision plus the median mean error of
    each method.

    Parameters
    ----------
    rows
        Results to report.
    directory
        Directory to write to. Created if necessary.

    Returns
    -------
    tuple of pathlib.Path
        Paths to the JSON and text reports.

    Raises
    ------
    InvalidArgumentError
        Raised if there are no rows.
    OSError
        Raised if the files cannot be written.
    """
    if not rows:
        raise InvalidArgumentError("Cannot write an empty report")
    ordered = _sorted(rows)
    directory.mkdir(parents=True, exist_ok=True)
    data = {
        "version": REPORT_VERSION,
        "rows": [row.to_dict() for row in ordered],
        "median_mean_error": aggregate_by_method(ordered),
    }
    json_path = directory / REPORT_JSON
    json_path.write_text(json.dumps(data, indent=2) + "\n")
    text_path = directory / REPORT_TEXT
    text_path.write_text(format_table(ordered))
    logging.info(f"Wrote report with {len(ordered)} rows to {directory}")
    return json_path, text_path


def read_report(path: Path) -> list[ReportRow]:
    """Read the rows of a ``report.json`` file."""
    data = json.loads(path.read_text())
    return [ReportRow.from_dict(row) for row in data["rows"]]
