"""Step, epoch and batch schedules."""

from __future__ import annotations

import math
from typing import NamedTuple

from ..config import TrainerConfig
from ..exceptions import InvalidArgumentError
from ..models.training import StepKind

__all__ = [
    "BatchSlot",
    "alpha_schedule",
    "build_batch_schedule",
    "default_batch_size",
    "lr_at_epoch",
]

ALPHA_MIN = 0.99
ALPHA_MAX = 0.999


class BatchSlot(NamedTuple):
    """One entry of an epoch's batch schedule."""

    kind: StepKind
    """Whether a labeled or unlabeled batch is consumed."""

    index: int
    """Running batch index within the epoch for that kind.

    Labeled indices keep counting past the number of labeled batches; the
    loader wraps them around with a fresh shuffle on every pass.
    """


def alpha_schedule(t: int) -> float:
    """Return the EMA factor for global step ``t``.

    The factor is ``1 − 1/(t+1)`` clamped to ``[0.99, 0.999]``.

    Raises
    ------
    InvalidArgumentError
        Raised if ``t`` is negative.
    """
    if t < 0:
        raise InvalidArgumentError(f"Global step must be non-negative: {t}")
    return min(max(1 - 1 / (t + 1), ALPHA_MIN), ALPHA_MAX)


def lr_at_epoch(epoch: int, config: TrainerConfig) -> float:
    """Return the step-decayed learning rate of an epoch.

    Raises
    ------
    InvalidArgumentError
        Raised if ``epoch`` is negative.
    """
    if epoch < 0:
        raise InvalidArgumentError(f"Epoch must be non-negative: {epoch}")
    return config.lr * config.lr_decay ** (epoch // config.decay_every)


def build_batch_schedule(
    n_labeled_batches: int,
    ratio: int,
    n_unlabeled_batches: int | None = None,
) -> list[BatchSlot]:
    """Interleave labeled and unlabeled batches.

    Every cycle is one labeled batch followed by ``ratio`` unlabeled
    batches. Cycles repeat until the unlabeled batches are used up, so only
    the last cycle may be shorter.

    Parameters
    ----------
    n_labeled_batches
        Labeled batches per pass over the labeled set.
    ratio
        Unlabeled batches per labeled batch.
    n_unlabeled_batches
        Unlabeled batches in the epoch. If `None`, one full cycle.

    Returns
    -------
    list of BatchSlot
        Schedule for one epoch.

    Raises
    ------
    InvalidArgumentError
        Raised if ``ratio`` or ``n_labeled_batches`` is below 1.
    """
    if ratio < 1:
        raise InvalidArgumentError(f"Batch ratio must be at least 1: {ratio}")
    if n_labeled_batches < 1:
        raise InvalidArgumentError("Need at least one labeled batch")
    if n_unlabeled_batches is None:
        n_unlabeled_batches = ratio

    schedule = []
    unlabeled = 0
    for cycle in range(math.ceil(n_unlabeled_batches / ratio)):
        schedule.append(BatchSlot(StepKind.labeled, cycle))
        stop = min(unlabeled + ratio, n_unlabeled_batches)
        schedule.extend(
            BatchSlot(StepKind.unlabeled, i) for i in range(unlabeled, stop)
        )
        unlabeled = stop
    return schedule


def default_batch_size(n_labeled: int) -> int:
    """Return the batch size used for a labeled set of a given size.

    One labeled image trains with batches of 1, up to five with batches of
    4, and anything larger with batches of 8.
    """
    if n_labeled <= 1:
        return 1
    if n_labeled <= 5:
        return 4
    return 8
