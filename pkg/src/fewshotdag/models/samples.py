"""Representations of images, datasets and augmentations."""

from __future__ import annotations

import re
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from ..diffcore import Array
from ..exceptions import InvalidArgumentError
from .landmarks import GraphTopology, LandmarkSet

__all__ = [
    "AugmentParams",
    "Dataset",
    "Sample",
    "Split",
]

_ID_REGEX = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")


class Split(str, Enum):
    """Role of a sample within a dataset."""

    labeled = "labeled"
    unlabeled = "unlabeled"
    validation = "validation"
    test = "test"


@dataclass(frozen=True, eq=False)
class Sample:
    """One grayscale image, annotated or not."""

    id: str
    """Stable identifier, also used as the image file name."""

    image: Array
    """Intensities in ``[0, 1]`` with shape ``H×W``."""

    landmarks: LandmarkSet | None = None
    """Annotation, absent for unlabeled samples."""

    split: Split = Split.labeled
    """Dataset split the sample belongs to."""

    def __post_init__(self) -> None:
        if not _ID_REGEX.match(self.id):
            raise InvalidArgumentError(f"Invalid sample id {self.id!r}")
        if self.image.ndim != 2 or min(self.image.shape) < 1:
            msg = f"Image must be H×W, not {self.image.shape}"
            raise InvalidArgumentError(msg)
        if self.image.size and (
            np.min(self.image) < 0 or np.max(self.image) > 1
        ):
            msg = f"Intensities of {self.id} outside [0, 1]"
            raise InvalidArgumentError(msg)

    @property
    def is_labeled(self) -> bool:
        """Whether the sample carries landmarks."""
        return self.landmarks is not None

    def with_landmarks(self, landmarks: LandmarkSet | None) -> Sample:
        """Return a copy with different landmarks."""
        return replace(self, landmarks=landmarks)


@dataclass(frozen=True)
class AugmentParams:
    """Similarity transform applied for augmentation.

    Rotation and scaling are about the image center ``(0.5, 0.5)``, and the
    translation is in normalized units.
    """

    angle: float = 0.0
    """Rotation in degrees, ``|angle| ≤ 30``."""

    scale: float = 1.0
    """Uniform scale factor in ``[0.8, 1.25]``."""

    dx: float = 0.0
    """Horizontal translation."""

    dy: float = 0.0
    """Vertical translation."""

    @classmethod
    def identity(cls) -> AugmentParams:
        """Return parameters that leave a sample unchanged."""
        return cls()

    @property
    def is_identity(self) -> bool:
        """Whether these parameters leave a sample unchanged."""
        return self == AugmentParams()


@dataclass
class Dataset:
    """Samples of every split plus the landmark graph they share."""

    num_landmarks: int
    """Landmark count K of every labeled sample."""

    image_size: tuple[int, int]
    """Image height and width."""

    edges: tuple[tuple[int, int], ...]
    """Landmark graph edges."""

    samples: list[Sample] = field(default_factory=list)
    """All samples, in file order."""

    generator_seed: int | None = None
    """Seed the dataset was generated from, if synthetic."""

    def split(self, split: Split) -> list[Sample]:
        """Return the samples of one split, in dataset order."""
        return [s for s in self.samples if s.split == split]

    def counts(self) -> dict[str, int]:
        """Return the number of samples per split."""
        return {s.value: len(self.split(s)) for s in Split}

    def topology(self) -> GraphTopology:
        """Return the landmark graph."""
        return GraphTopology.from_edges(self.num_landmarks, self.edges)

    def with_labeled(self, labeled: Sequence[Sample]) -> Dataset:
        """Return a copy whose labeled split is replaced."""
        others = [s for s in self.samples if s.split != Split.labeled]
        return replace(self, samples=[*labeled, *others])
