"""Shuffled, augmented batches with a seed-determined order."""

from __future__ import annotations

import math
import zlib
from collections import deque
from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..diffcore import Array
from ..exceptions import InvalidArgumentError
from ..models.samples import Sample
from ..synthdata.augment import augment, sample_augment_params

__all__ = [
    "Batch",
    "BatchLoader",
    "prefetch",
]


@dataclass(frozen=True, eq=False)
class Batch:
    """Images ready for one forward pass."""

    ids: tuple[str, ...]
    """Sample identifiers, in batch order."""

    images: Array
    """Intensities of shape ``B×H×W``."""

    landmarks: Array | None
    """Landmarks of shape ``B×K×2``, if every sample has them."""

    def __len__(self) -> int:
        return len(self.ids)


class BatchLoader:
    """Serve the batches of one sample pool.

    Batch ``i`` of an epoch belongs to pass ``i // batches_per_pass`` over
    the pool. Every pass uses its own permutation and every sample its own
    augmentation, both derived from the seed, so a batch depends only on
    ``(seed, stream, epoch, i)``.

    Parameters
    ----------
    samples
        Pool to draw from.
    batch_size
        Samples per batch. The last batch of a pass may be smaller.
    seed
        Run seed.
    stream
        Distinguishes pools sharing a run seed.
    augment
        Whether to apply random similarity transforms.
    box
        Translation extent for samples without landmarks.

    Raises
    ------
    InvalidArgumentError
        Raised if the pool is empty or the batch size is below 1.
    """

    def __init__(
        self,
        samples: Sequence[Sample],
        batch_size: int,
        *,
        seed: int,
        stream: int = 0,
        augment: bool = True,
        box: tuple[float, float] = (0.0, 0.0),
    ) -> None:
        if not samples:
            raise InvalidArgumentError("Cannot batch an empty sample pool")
        if batch_size < 1:
            raise InvalidArgumentError(f"Invalid batch size {batch_size}")
        self._samples = list(samples)
        self._batch_size = batch_size
        self._seed = seed
        self._stream = stream
        self._augment = augment
        self._box = box

    @property
    def batches_per_pass(self) -> int:
        """Number of batches covering the pool once."""
        return math.ceil(len(self._samples) / self._batch_size)

    def batch(self, epoch: int, index: int) -> Batch:
        """Assemble one batch.

        Parameters
        ----------
        epoch
            Epoch number.
        index
            Running batch index within the epoch; values beyond one pass
            start a new, reshuffled pass.

        Returns
        -------
        Batch
            Augmented images and, if present, landmarks.
        """
        pass_index, position = divmod(index, self.batches_per_pass)
        rng = np.random.default_rng(
            [self._seed, self._stream, epoch, pass_index]
        )
        order = rng.permutation(len(self._samples))
        start = position * self._batch_size
        indices = order[start : start + self._batch_size]
        chosen = [self._samples[i] for i in indices]
        prepared = [self._prepare(s, epoch, pass_index) for s in chosen]

        landmarks = None
        if all(s.landmarks is not None for s in prepared):
            landmarks = np.stack(
                [s.landmarks.coords for s in prepared if s.landmarks]
            )
        return Batch(
            ids=tuple(s.id for s in prepared),
            images=np.stack([s.image for s in prepared]),
            landmarks=landmarks,
        )

    def _prepare(self, sample: Sample, epoch: int, pass_index: int) -> Sample:
        if not self._augment:
            return sample
        key = zlib.crc32(sample.id.encode())
        seed = np.random.SeedSequence([self._seed, epoch, pass_index, key])
        rng = np.random.default_rng(seed)
        box = self._box
        if sample.landmarks is not None:
            box = sample.landmarks.bounding_box()
        return augment(sample, sample_augment_params(rng, box))


def prefetch(
    jobs: Sequence[Callable[[], Batch]], workers: int = 0
) -> Iterator[Batch]:
    """Run batch preparation jobs, yielding results in job order.

    Parameters
    ----------
    jobs
        Callables producing batches.
    workers
        Threads preparing batches ahead of the consumer, 0 to prepare each
        batch when it is requested.
    """
    if workers <= 0:
        for job in jobs:
            yield job()
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures: deque[Future[Batch]] = deque()
        next_job = 0
        for _ in range(len(jobs)):
            while next_job < len(jobs) and len(futures) < 2 * workers:
                futures.append(pool.submit(jobs[next_job]))
                next_job += 1
            yield futures.popleft().result()
