"""Dataset directories: a JSON manifest plus one PGM file per image."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel, Extra, Field, ValidationError, validator

from ..config import format_errors
from ..exceptions import DatasetFormatError, DatasetVersionError
from ..models.landmarks import LandmarkSet
from ..models.samples import Dataset, Sample, Split

__all__ = [
    "DATASET_FORMAT_VERSION",
    "DatasetManifest",
    "ManifestEntry",
    "read_dataset",
    "write_dataset",
]

DATASET_FORMAT_VERSION = 1
"""Version written to, and accepted from, ``manifest.json``."""

MANIFEST_NAME = "manifest.json"
IMAGES_DIR = "images"


class ManifestEntry(BaseModel):
    """One sample as recorded in the manifest."""

    id: str
    split: Split
    landmarks: list[tuple[float, float]] | None = None

    class Config:
        extra = Extra.forbid


class DatasetManifest(BaseModel):
    """Contents of ``manifest.json``."""

    version: int = Field(..., description="Format version")

    num_landmarks: int = Field(..., ge=1, description="Landmark count K")

    image_size: tuple[int, int] = Field(..., description="Height and width")

    edges: list[tuple[int, int]] = Field(
        default_factory=list, description="Landmark graph edges"
    )

    generator_seed: int | None = Field(
        None, description="Seed of a generated dataset"
    )

    counts: dict[str, int] = Field(..., description="Samples per split")

    samples: list[ManifestEntry] = Field(..., description="Every sample")

    class Config:
        extra = Extra.forbid

    @validator("samples")
    def _check_samples(
        cls, v: list[ManifestEntry], values: dict[str, Any]
    ) -> list[ManifestEntry]:
        ids = [entry.id for entry in v]
        if len(set(ids)) != len(ids):
            raise ValueError("sample ids are not unique")
        counts = values.get("counts")
        if counts is not None:
            for split in Split:
                actual = sum(1 for entry in v if entry.split == split)
                if counts.get(split.value, 0) != actual:
                    msg = (
                        f"{actual} {split.value} samples listed but count"
                        f" says {counts.get(split.value, 0)}"
                    )
                    raise ValueError(msg)
        k = values.get("num_landmarks")
        for entry in v:
            has_landmarks = entry.landmarks is not None
            if has_landmarks == (entry.split == Split.unlabeled):
                msg = f"sample {entry.id} has wrong annotation for its split"
                raise ValueError(msg)
            if has_landmarks and len(entry.landmarks or []) != k:
                raise ValueError(f"sample {entry.id} does not have {k} points")
        return v


def _image_path(root: Path, sample_id: str) -> Path:
    return root / IMAGES_DIR / f"{sample_id}.pgm"


def write_dataset(dataset: Dataset, path: Path) -> Path:
    """Write a dataset directory.

    Images are stored as 8-bit binary PGM, so intensities are rounded to
    multiples of 1/255; generated images already are and round-trip exactly.

    Parameters
    ----------
    dataset
        Dataset to write.
    path
        Directory to create or overwrite. Images left over from an earlier
        dataset in the same directory are removed.

    Returns
    -------
    pathlib.Path
        Path to the manifest.
    """
    images = path / IMAGES_DIR
    images.mkdir(parents=True, exist_ok=True)
    entries = []
    written: set[str] = set()
    for sample in dataset.samples:
        pixels = np.round(sample.image * 255.0).astype(np.uint8)
        image_path = _image_path(path, sample.id)
        Image.fromarray(pixels).save(image_path, format="PPM")
        written.add(image_path.name)
        landmarks = sample.landmarks.to_list() if sample.landmarks else None
        entry = ManifestEntry(
            id=sample.id, split=sample.split, landmarks=landmarks
        )
        entries.append(entry)
    manifest = DatasetManifest(
        version=DATASET_FORMAT_VERSION,
        num_landmarks=dataset.num_landmarks,
        image_size=dataset.image_size,
        edges=list(dataset.edges),
        generator_seed=dataset.generator_seed,
        counts={split.value: len(dataset.split(split)) for split in Split},
        samples=entries,
    )
    manifest_path = path / MANIFEST_NAME
    manifest_path.write_text(manifest.json(indent=2) + "\n")
    for stale in images.glob("*.pgm"):
        if stale.name not in written:
            stale.unlink()
    logging.info(f"Wrote {len(entries)} samples to {path}")
    return manifest_path


def _load_manifest(path: Path) -> DatasetManifest:
    manifest_path = path / MANIFEST_NAME
    try:
        raw = json.loads(manifest_path.read_text())
    except FileNotFoundError as e:
        raise DatasetFormatError(f"No manifest in {path}") from e
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DatasetFormatError(f"Corrupt manifest {manifest_path}") from e
    if not isinstance(raw, dict) or "version" not in raw:
        raise DatasetFormatError(f"Manifest {manifest_path} has no version")
    if raw["version"] != DATASET_FORMAT_VERSION:
        msg = (
            f"Dataset version {raw['version']!r} is not supported"
            f" (expected {DATASET_FORMAT_VERSION})"
        )
        raise DatasetVersionError(msg)
    try:
        return DatasetManifest.parse_obj(raw)
    except ValidationError as e:
        msg = f"Corrupt manifest {manifest_path}: {format_errors(e)}"
        raise DatasetFormatError(msg) from e


def _read_image(path: Path, size: tuple[int, int]) -> np.ndarray:
    try:
        with Image.open(path) as image:
            if image.format != "PPM" or image.mode != "L":
                msg = f"{path} is not an 8-bit grayscale PGM"
                raise DatasetFormatError(msg)
            pixels = np.asarray(image, dtype=np.uint8)
    except FileNotFoundError as e:
        raise DatasetFormatError(f"Missing image {path}") from e
    except (OSError, UnidentifiedImageError) as e:
        raise DatasetFormatError(f"Cannot read image {path}") from e
    if pixels.shape != size:
        msg = f"{path} is {pixels.shape}, manifest says {size}"
        raise DatasetFormatError(msg)
    return pixels.astype(np.float64) / 255.0


def read_dataset(path: Path) -> Dataset:
    """Read a dataset directory.

    Parameters
    ----------
    path
        Directory written by `write_dataset`.

    Returns
    -------
    Dataset
        Samples in manifest order.

    Raises
    ------
    DatasetFormatError
        Raised if the manifest is missing or corrupt, or an image file is
        missing or does not match it.
    DatasetVersionError
        Raised if the manifest declares another format version. Nothing else
        is read in that case.
    """
    manifest = _load_manifest(path)
    samples = []
    for entry in manifest.samples:
        image = _read_image(_image_path(path, entry.id), manifest.image_size)
        landmarks = None
        if entry.landmarks is not None:
            landmarks = LandmarkSet(entry.landmarks)
        samples.append(Sample(entry.id, image, landmarks, entry.split))
    return Dataset(
        num_landmarks=manifest.num_landmarks,
        image_size=manifest.image_size,
        edges=tuple(manifest.edges),
        samples=samples,
        generator_seed=manifest.generator_seed,
    )
