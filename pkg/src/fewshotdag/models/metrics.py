"""Representations of evaluation results."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from ..diffcore import Array

__all__ = [
    "MetricSummary",
    "ReportRow",
]


@dataclass(frozen=True, eq=False)
class MetricSummary:
    """Landmark error statistics over a test set."""

    errors: Array
    """Per-landmark errors in pixels, shape ``N×K``."""

    mean: float
    """Mean over all landmark errors."""

    std: float
    """Standard deviation over all landmark errors."""

    failure_rate: float
    """Fraction of images with any landmark error above the threshold."""

    landmark_failure_rate: float
    """Fraction of landmarks with an error above the threshold."""

    threshold: float
    """Failure threshold in pixels."""

    @property
    def sample_count(self) -> int:
        """Number of images summarized."""
        return int(self.errors.shape[0])

    def to_dict(self) -> dict[str, Any]:
        """Convert to a JSON-compatible dict."""
        return {
            "mean": self.mean,
            "std": self.std,
            "failure_rate": self.failure_rate,
            "landmark_failure_rate": self.landmark_failure_rate,
            "threshold": self.threshold,
            "sample_count": self.sample_count,
            "errors": self.errors.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> MetricSummary:
        """Rebuild from the output of `to_dict`."""
        return cls(
            errors=np.asarray(data["errors"], dtype=np.float64),
            mean=data["mean"],
            std=data["std"],
            failure_rate=data["failure_rate"],
            landmark_failure_rate=data["landmark_failure_rate"],
            threshold=data["threshold"],
        )


@dataclass(frozen=True)
class ReportRow:
    """One method and seed in a results table."""

    method: str
    """Training strategy or experiment label."""

    seed: int
    """Seed of the run."""

    summary: MetricSummary
    """Test metrics of the run."""

    converged: bool = True
    """Whether training converged."""

    labeled_count: int | None = None
    """Number of labeled training samples, if the run varied it."""

    def to_dict(self) -> dict[str, Any]:
        """Convert to a JSON-compatible dict."""
        return {
            "method": self.method,
            "seed": self.seed,
            "converged": self.converged,
            "labeled_count": self.labeled_count,
            **self.summary.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ReportRow:
        """Rebuild from the output of `to_dict`."""
        return cls(
            method=data["method"],
            seed=data["seed"],
            converged=data["converged"],
            labeled_count=data.get("labeled_count"),
            summary=MetricSummary.from_dict(data),
        )
