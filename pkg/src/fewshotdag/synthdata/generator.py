"""Procedural stick-figure images with joint landmarks."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from PIL import Image, ImageDraw

from ..config import SPLIT_STRIDE, GenerationConfig, SyntheticShapeSpec
from ..diffcore import Array
from ..exceptions import InvalidArgumentError
from ..models.landmarks import LandmarkSet
from ..models.samples import Dataset, Sample, Split

__all__ = [
    "SUPERSAMPLING",
    "generate_dataset",
    "generate_sample",
    "quantize",
    "split_seed",
]

SUPERSAMPLING = 4
"""Figures are drawn at this multiple of the image size, then reduced."""

_TILT = 15.0
_FILL = (0.7, 1.0)


def quantize(image: Array) -> Array:
    """Round intensities to multiples of 1/255."""
    return np.round(image * 255.0) / 255.0


def split_seed(dataset_seed: int, split: Split, index: int) -> int:
    """Return the seed of one generated sample.

    Every split of every dataset seed owns a disjoint range of seeds.
    """
    split_index = list(Split).index(split)
    return (dataset_seed * len(Split) + split_index) * SPLIT_STRIDE + index


def _pose(spec: SyntheticShapeSpec, rng: np.random.Generator) -> Array:
    """Sample joint positions in template units."""
    joints = np.zeros((len(spec.template), 2))
    for index, joint in enumerate(spec.template):
        if joint.parent is None:
            continue
        length = rng.uniform(*joint.length)
        angle = math.radians(rng.uniform(*joint.angle))
        offset = length * np.array([math.cos(angle), math.sin(angle)])
        joints[index] = joints[joint.parent] + offset
    return joints


def _place(
    spec: SyntheticShapeSpec, joints: Array, rng: np.random.Generator
) -> Array:
    """Tilt, scale and move the figure into the free area of the image."""
    theta = math.radians(rng.uniform(-_TILT, _TILT))
    rotation = np.array(
        [
            [math.cos(theta), -math.sin(theta)],
            [math.sin(theta), math.cos(theta)],
        ]
    )
    points = joints @ rotation.T
    points = points - points.min(axis=0)
    extent = max(float(points.max()), 1e-12)
    free = 1 - 2 * spec.margin
    points = points * (free * rng.uniform(*_FILL) / extent)
    slack = free - points.max(axis=0)
    offset = spec.margin + rng.uniform(0.0, 1.0, size=2) * slack
    return points + offset


def _render(
    spec: SyntheticShapeSpec, coords: Array, rng: np.random.Generator
) -> Array:
    size = spec.image_size
    factor = SUPERSAMPLING
    canvas = Image.new("L", (size * factor, size * factor), 0)
    draw = ImageDraw.Draw(canvas)

    # Centers of output pixels sit in the middle of their supersampled block.
    pixels = coords * (size - 1) * factor + (factor - 1) / 2
    fill = round(255 * rng.uniform(*spec.intensity))
    width = rng.uniform(*spec.stroke_width) * factor
    for parent, child in spec.edges:
        line = [tuple(pixels[parent]), tuple(pixels[child])]
        draw.line(line, fill=fill, width=max(round(width), 1))
    radius = width
    for x, y in pixels:
        box = [x - radius, y - radius, x + radius, y + radius]
        draw.ellipse(box, fill=fill)

    reduced = canvas.resize((size, size), Image.Resampling.BOX)
    image = np.asarray(reduced, dtype=np.float64) / 255.0
    if spec.noise_level > 0:
        noise = rng.normal(0.0, spec.noise_level, size=image.shape)
        image = np.clip(image + noise, 0.0, 1.0)
    return quantize(image)


def generate_sample(
    spec: SyntheticShapeSpec,
    seed: int,
    *,
    sample_id: str | None = None,
    split: Split = Split.labeled,
) -> Sample:
    """Render one stick figure and its joint landmarks.

    Joint angles and limb lengths are drawn from the template, the figure is
    tilted, scaled and placed inside the margin, then drawn with
    anti-aliased strokes and joint blobs over background noise.

    Parameters
    ----------
    spec
        Figure layout and rendering ranges.
    seed
        Seed of every random choice.
    sample_id
        Identifier, by default derived from the seed.
    split
        Split of the sample. Unlabeled samples carry no landmarks.

    Returns
    -------
    Sample
        Rendered sample with intensities quantized to multiples of 1/255.

    Raises
    ------
    InvalidArgumentError
        Raised if the landmark count does not match the template.
    """
    if spec.num_landmarks != len(spec.template):
        msg = (
            f"Template has {len(spec.template)} joints but"
            f" {spec.num_landmarks} landmarks were requested"
        )
        raise InvalidArgumentError(msg)
    rng = np.random.default_rng(seed)
    coords = _place(spec, _pose(spec, rng), rng)
    image = _render(spec, coords, rng)
    landmarks = None if split == Split.unlabeled else LandmarkSet(coords)
    if sample_id is None:
        sample_id = f"sample-{seed}"
    return Sample(sample_id, image, landmarks, split)


def generate_dataset(
    config: GenerationConfig, *, workers: int = 0
) -> Dataset:
    """Generate every split of a synthetic dataset.

    Parameters
    ----------
    config
        Split sizes, dataset seed and figure layout.
    workers
        Threads rendering samples, 0 to render inline. The result does not
        depend on this.

    Returns
    -------
    Dataset
        Samples ordered by split, then index.
    """
    jobs = [
        (split, index)
        for split, count in (
            (Split.labeled, config.labeled),
            (Split.unlabeled, config.unlabeled),
            (Split.validation, config.validation),
            (Split.test, config.test),
        )
        for index in range(count)
    ]

    def render(job: tuple[Split, int]) -> Sample:
        split, index = job
        seed = split_seed(config.seed, split, index)
        sample_id = f"{split.value}-{index:06d}"
        return generate_sample(
            config.shape, seed, sample_id=sample_id, split=split
        )

    if workers > 0:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(render, jobs))
    else:
        samples = [render(job) for job in jobs]
    logging.info(f"Generated {len(samples)} samples from seed {config.seed}")

    size = config.shape.image_size
    return Dataset(
        num_landmarks=config.shape.num_landmarks,
        image_size=(size, size),
        edges=config.shape.edges,
        samples=samples,
        generator_seed=config.seed,
    )
