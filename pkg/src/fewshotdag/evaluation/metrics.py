"""Landmark error metrics."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike

from ..config import EvaluationConfig, Strategy
from ..dag.forward import predict_landmarks
from ..dag.params import DagModelParams
from ..diffcore import Array
from ..exceptions import InvalidArgumentError
from ..models.landmarks import GraphTopology, LandmarkSet, MeanShape
from ..models.metrics import MetricSummary, ReportRow
from ..models.samples import Sample

__all__ = [
    "aggregate_by_method",
    "euclidean_errors",
    "evaluate_model",
    "method_order",
    "summarize",
]


def _coords(value: LandmarkSet | ArrayLike) -> Array:
    if isinstance(value, LandmarkSet):
        return value.coords
    return np.asarray(value, dtype=np.float64)


def euclidean_errors(
    pred: LandmarkSet | ArrayLike,
    gt: LandmarkSet | ArrayLike,
    image_width: float,
    image_height: float | None = None,
) -> Array:
    """Return the pixel distance of every predicted landmark.

    Normalized offsets are scaled by the image width and height, so the
    error of landmark ``i`` is ``√((Δx·W)² + (Δy·H)²)``.

    Parameters
    ----------
    pred
        Predicted landmarks, ``K×2`` or ``N×K×2``.
    gt
        Ground truth of the same shape.
    image_width
        Width W in pixels.
    image_height
        Height H in pixels, by default equal to the width.

    Returns
    -------
    numpy.ndarray
        Errors of shape ``K`` or ``N×K``.

    Raises
    ------
    InvalidArgumentError
        Raised if the shapes differ or a dimension is not positive.
    """
    pred_coords = _coords(pred)
    gt_coords = _coords(gt)
    if pred_coords.shape != gt_coords.shape or pred_coords.shape[-1] != 2:
        msg = (
            f"Cannot compare landmarks of shape {pred_coords.shape} and"
            f" {gt_coords.shape}"
        )
        raise InvalidArgumentError(msg)
    if image_height is None:
        image_height = image_width
    if image_width <= 0 or image_height <= 0:
        msg = f"Invalid image size {image_width}×{image_height}"
        raise InvalidArgumentError(msg)
    scale = np.array([image_width, image_height], dtype=np.float64)
    offsets = (pred_coords - gt_coords) * scale
    return np.hypot(offsets[..., 0], offsets[..., 1])


def summarize(
    errors: ArrayLike,
    image_width: float,
    *,
    failure_fraction: float = 0.05,
    ddof: int = 0,
) -> MetricSummary:
    """Summarize the landmark errors of a test set.

    Parameters
    ----------
    errors
        Errors in pixels, one row of K landmarks per image.
    image_width
        Width in pixels, which sets the failure threshold.
    failure_fraction
        Threshold as a fraction of the width.
    ddof
        Delta degrees of freedom of the standard deviation, 0 for the
        population value.

    Returns
    -------
    MetricSummary
        Mean and standard deviation over every landmark error, and the
        fraction of images with any landmark, or of landmarks, above the
        threshold.

    Raises
    ------
    InvalidArgumentError
        Raised if there are no errors.
    """
    values = np.atleast_2d(np.asarray(errors, dtype=np.float64))
    if values.size == 0:
        raise InvalidArgumentError("Cannot summarize an empty error set")
    threshold = failure_fraction * image_width
    failed = values > threshold
    return MetricSummary(
        errors=values,
        mean=float(np.mean(values)),
        std=float(np.std(values, ddof=ddof)) if values.size > ddof else 0.0,
        failure_rate=float(np.mean(failed.any(axis=1))),
        landmark_failure_rate=float(np.mean(failed)),
        threshold=threshold,
    )


def evaluate_model(
    params: DagModelParams,
    samples: Sequence[Sample],
    mean_shape: MeanShape | LandmarkSet,
    topology: GraphTopology,
    settings: EvaluationConfig | None = None,
) -> MetricSummary:
    """Predict landmarks for labeled samples and summarize the errors.

    Raises
    ------
    InvalidArgumentError
        Raised if there are no samples or one of them has no landmarks.
    """
    if settings is None:
        settings = EvaluationConfig()
    if not samples:
        raise InvalidArgumentError("Cannot evaluate on an empty sample set")
    gts = []
    for sample in samples:
        if sample.landmarks is None:
            msg = f"Sample {sample.id} has no landmarks to evaluate against"
            raise InvalidArgumentError(msg)
        gts.append(sample.landmarks.coords)
    predictions = predict_landmarks(
        params, [s.image for s in samples], mean_shape, topology
    )
    height, width = samples[0].image.shape
    errors = euclidean_errors(
        np.stack([p.coords for p in predictions]),
        np.stack(gts),
        width,
        height,
    )
    return summarize(
        errors,
        width,
        failure_fraction=settings.failure_fraction,
        ddof=settings.ddof,
    )


def method_order(method: str) -> tuple[int, str]:
    """Sort key placing strategies in declaration order, others after."""
    names = [s.value for s in Strategy]
    if method in names:
        return names.index(method), ""
    return len(names), method


def aggregate_by_method(rows: Sequence[ReportRow]) -> dict[str, float]:
    """Return the median mean error of each method over its seeds.

    Methods are returned in report order.
    """
    by_method: dict[str, list[float]] = {}
    for row in rows:
        by_method.setdefault(row.method, []).append(row.summary.mean)
    return {
        method: float(np.median(by_method[method]))
        for method in sorted(by_method, key=method_order)
    }
