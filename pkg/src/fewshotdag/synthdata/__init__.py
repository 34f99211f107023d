"""Synthetic datasets, augmentation and dataset files."""

from .augment import (
    add_gaussian_noise,
    augment,
    resize_normalize,
    sample_augment_params,
    transform_points,
)
from .generator import generate_dataset, generate_sample, split_seed
from .storage import DatasetManifest, read_dataset, write_dataset

__all__ = [
    "DatasetManifest",
    "add_gaussian_noise",
    "augment",
    "generate_dataset",
    "generate_sample",
    "read_dataset",
    "resize_normalize",
    "sample_augment_params",
    "split_seed",
    "transform_points",
    "write_dataset",
]
