"""Training on labeled samples only."""

from __future__ import annotations

import numpy as np

from ...config import Strategy
from ...diffcore import Tensor
from ...exceptions import InvalidArgumentError
from ...models.training import TeacherStudentState
from ..batches import Batch
from .base import BaseStrategy, TrainingContext

__all__ = ["SupervisedStrategy"]


class SupervisedStrategy(BaseStrategy):
    """Continue supervised training; unlabeled samples are ignored.

    Pretraining runs the same loop, so training with this strategy from a
    pretrained model is the same as pretraining for longer.
    """

    uses_unlabeled = False

    @property
    def name(self) -> Strategy:
        return Strategy.supervised_only

    def unlabeled_loss(
        self,
        state: TeacherStudentState,
        batch: Batch,
        context: TrainingContext,
        rng: np.random.Generator,
    ) -> Tensor:
        raise InvalidArgumentError("Supervised training has no unlabeled step")
