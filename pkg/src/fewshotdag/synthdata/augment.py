"""Augmentation, noise and normalization of grayscale images.

Normalized coordinate ``x`` of an ``H×W`` image corresponds to column
``x·(W−1)``, so ``0`` and ``1`` are the centers of the border pixels.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy import ndimage

from ..diffcore import Array
from ..exceptions import InvalidArgumentError
from ..models.landmarks import LandmarkSet
from ..models.samples import AugmentParams, Sample

__all__ = [
    "MAX_ANGLE",
    "SCALE_RANGE",
    "SeedLike",
    "add_gaussian_noise",
    "augment",
    "resize_normalize",
    "sample_augment_params",
    "transform_points",
]

MAX_ANGLE = 30.0
"""Largest absolute rotation in degrees."""

SCALE_RANGE = (0.8, 1.25)
"""Smallest and largest scale factor."""

MAX_SHIFT = 0.5
"""Largest absolute translation, half the extent of the unit square."""

SeedLike = (
    int | Sequence[int] | np.random.SeedSequence | np.random.Generator
)
"""Anything `numpy.random.default_rng` accepts."""


def _check_params(params: AugmentParams) -> None:
    if abs(params.angle) > MAX_ANGLE:
        msg = f"Rotation {params.angle} outside ±{MAX_ANGLE} degrees"
        raise InvalidArgumentError(msg)
    if not SCALE_RANGE[0] <= params.scale <= SCALE_RANGE[1]:
        msg = f"Scale {params.scale} outside {list(SCALE_RANGE)}"
        raise InvalidArgumentError(msg)
    if abs(params.dx) > MAX_SHIFT or abs(params.dy) > MAX_SHIFT:
        msg = f"Translation ({params.dx}, {params.dy}) too large"
        raise InvalidArgumentError(msg)


def _linear_part(params: AugmentParams) -> Array:
    theta = math.radians(params.angle)
    cos, sin = math.cos(theta), math.sin(theta)
    return params.scale * np.array([[cos, -sin], [sin, cos]])


def transform_points(points: ArrayLike, params: AugmentParams) -> Array:
    """Apply the similarity transform to normalized ``N×2`` points.

    Rotation and scaling are about ``(0.5, 0.5)``; with y pointing down a
    positive angle turns the x axis towards the y axis.
    """
    coords = np.asarray(points, dtype=np.float64)
    if params.is_identity:
        return coords.copy()
    matrix = _linear_part(params)
    shift = np.array([params.dx, params.dy])
    return (coords - 0.5) @ matrix.T + 0.5 + shift


def augment(sample: Sample, params: AugmentParams) -> Sample:
    """Rotate, scale and translate a sample.

    The image is resampled bilinearly with zeros outside the source, and the
    same transform is applied exactly to the landmarks, if any.

    Parameters
    ----------
    sample
        Labeled or unlabeled sample.
    params
        Transform to apply.

    Returns
    -------
    Sample
        Transformed copy.

    Raises
    ------
    InvalidArgumentError
        Raised if the parameters are outside the augmentation ranges.
    """
    _check_params(params)
    height, width = sample.image.shape
    spans = np.array([max(width - 1, 1), max(height - 1, 1)], dtype=float)

    # Map every output pixel back to its source position.
    rows, cols = np.indices((height, width), dtype=np.float64)
    target = np.stack([cols.ravel(), rows.ravel()], axis=1) / spans
    inverse = np.linalg.inv(_linear_part(params))
    shift = np.array([params.dx, params.dy])
    source = ((target - 0.5 - shift) @ inverse.T + 0.5) * spans
    warped = ndimage.map_coordinates(
        sample.image,
        [source[:, 1], source[:, 0]],
        order=1,
        mode="constant",
        cval=0.0,
    ).reshape(height, width)
    image = np.clip(warped, 0.0, 1.0).astype(sample.image.dtype)

    landmarks = None
    if sample.landmarks is not None:
        coords = transform_points(sample.landmarks.coords, params)
        landmarks = LandmarkSet(coords)
    return Sample(sample.id, image, landmarks, sample.split)


def sample_augment_params(
    rng: np.random.Generator, box: tuple[float, float]
) -> AugmentParams:
    """Draw augmentation parameters.

    Parameters
    ----------
    rng
        Source of randomness.
    box
        Width and height of the landmark bounding box; the translation is
        drawn uniformly within half of it in each direction.

    Returns
    -------
    AugmentParams
        Rotation within ±30 degrees, scale within ``[0.8, 1.25]`` and the
        translation.
    """
    half_w = min(box[0] / 2, MAX_SHIFT)
    half_h = min(box[1] / 2, MAX_SHIFT)
    return AugmentParams(
        angle=float(rng.uniform(-MAX_ANGLE, MAX_ANGLE)),
        scale=float(rng.uniform(*SCALE_RANGE)),
        dx=float(rng.uniform(-half_w, half_w)),
        dy=float(rng.uniform(-half_h, half_h)),
    )


def add_gaussian_noise(image: Array, sigma: float, seed: SeedLike) -> Array:
    """Add zero-mean Gaussian noise and clip to ``[0, 1]``.

    Parameters
    ----------
    image
        Array of intensities, any shape.
    sigma
        Standard deviation of the noise.
    seed
        Seed or generator of the noise.

    Returns
    -------
    numpy.ndarray
        Noised copy with the dtype of the input.

    Raises
    ------
    InvalidArgumentError
        Raised if ``sigma`` is negative.
    """
    if sigma < 0:
        raise InvalidArgumentError(f"Noise std must be non-negative: {sigma}")
    if sigma == 0:
        return image.copy()
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, size=image.shape)
    return np.clip(image + noise, 0.0, 1.0).astype(image.dtype)


def resize_normalize(raw: ArrayLike, size: int | tuple[int, int]) -> Array:
    """Rescale intensities to ``[0, 1]`` and resize bilinearly.

    Intensities are mapped linearly so the minimum becomes 0 and the maximum
    1; a constant image maps to 0. Resizing aligns pixel centers, so a
    factor-2 reduction averages 2×2 blocks.

    Parameters
    ----------
    raw
        Two-dimensional source image.
    size
        Output size, or height and width.

    Returns
    -------
    numpy.ndarray
        Float64 image of the requested size.

    Raises
    ------
    InvalidArgumentError
        Raised if the source or target dimensions are degenerate.
    """
    image = np.asarray(raw, dtype=np.float64)
    if image.ndim != 2 or min(image.shape) < 1:
        raise InvalidArgumentError(f"Cannot resize image of {image.shape}")
    out_h, out_w = (size, size) if isinstance(size, int) else size
    if out_h < 1 or out_w < 1:
        raise InvalidArgumentError(f"Invalid target size {size}")

    low, high = image.min(), image.max()
    if high > low:
        image = (image - low) / (high - low)
    else:
        image = np.zeros_like(image)
    if image.shape == (out_h, out_w):
        return image

    in_h, in_w = image.shape
    rows = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    cols = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    grid_rows, grid_cols = np.meshgrid(rows, cols, indexing="ij")
    resized = ndimage.map_coordinates(
        image, [grid_rows, grid_cols], order=1, mode="nearest"
    )
    return np.clip(resized, 0.0, 1.0)
