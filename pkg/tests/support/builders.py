"""Builders for small models, datasets and configurations."""

from __future__ import annotations

from pathlib import Path
from typing import Any

import numpy as np

from fewshotdag.config import (
    ArchitectureConfig,
    DataConfig,
    ExperimentConfig,
    GenerationConfig,
    LossConfig,
    SyntheticShapeSpec,
    TrainerConfig,
)
from fewshotdag.models.landmarks import GraphTopology, LandmarkSet
from fewshotdag.models.samples import Sample, Split

__all__ = [
    "TINY_SIZE",
    "random_samples",
    "ring",
    "tiny_architecture",
    "tiny_config",
    "tiny_generation",
    "tiny_trainer",
]

TINY_SIZE = 16
"""Image size used by fast tests."""


def tiny_architecture(
    num_landmarks: int = 4, **overrides: Any
) -> ArchitectureConfig:
    """Return a small float64 architecture for 16×16 images."""
    settings: dict[str, Any] = {
        "image_size": TINY_SIZE,
        "num_landmarks": num_landmarks,
        "encoder_channels": (4, 4),
        "encoder_strides": (1, 2),
        "gcn_width": 8,
        "global_layers": 1,
        "local_layers": 1,
        "cascade_steps": 2,
    }
    settings.update(overrides)
    return ArchitectureConfig(**settings)


def tiny_trainer(**overrides: Any) -> TrainerConfig:
    """Return trainer settings for a few quick epochs."""
    settings: dict[str, Any] = {
        "ratio": 2,
        "lr": 1e-3,
        "pretrain_epochs": 2,
        "epochs": 2,
        "batch_size": 2,
    }
    settings.update(overrides)
    return TrainerConfig(**settings)


def tiny_generation(**overrides: Any) -> GenerationConfig:
    """Return generation settings for a handful of 16×16 figures."""
    settings: dict[str, Any] = {
        "labeled": 3,
        "unlabeled": 4,
        "validation": 2,
        "test": 3,
        "seed": 11,
        "shape": SyntheticShapeSpec(
            image_size=TINY_SIZE, stroke_width=(1.0, 1.5)
        ),
    }
    settings.update(overrides)
    return GenerationConfig(**settings)


def tiny_config(output_dir: Path, **overrides: Any) -> ExperimentConfig:
    """Return an experiment that generates and trains at toy scale."""
    settings: dict[str, Any] = {
        "data": DataConfig(generation=tiny_generation()),
        "architecture": tiny_architecture(num_landmarks=8),
        "loss": LossConfig(),
        "trainer": tiny_trainer(),
        "output_dir": output_dir,
    }
    settings.update(overrides)
    return ExperimentConfig(**settings)


def random_samples(
    count: int,
    num_landmarks: int = 4,
    *,
    seed: int = 0,
    split: Split = Split.labeled,
    size: int = TINY_SIZE,
) -> list[Sample]:
    """Return samples with random images and landmarks."""
    rng = np.random.default_rng(seed)
    samples = []
    for index in range(count):
        image = rng.uniform(size=(size, size))
        landmarks = None
        if split != Split.unlabeled:
            coords = rng.uniform(0.2, 0.8, size=(num_landmarks, 2))
            landmarks = LandmarkSet(coords)
        samples.append(
            Sample(f"{split.value}-{index:06d}", image, landmarks, split)
        )
    return samples


def ring(num_landmarks: int = 4) -> GraphTopology:
    """Return the ring graph used with random samples."""
    return GraphTopology.ring(num_landmarks)
