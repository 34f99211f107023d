"""Mean-teacher consistency training, with or without the JS term."""

from __future__ import annotations

import numpy as np

from ...config import LossConfig, Strategy, TrainerConfig
from ...diffcore import Tensor, no_grad
from ...exceptions import InvalidArgumentError
from ...losses import unlabeled_total
from ...models.training import TeacherStudentState
from ..batches import Batch
from .base import BaseStrategy, TrainingContext

__all__ = ["MeanTeacherStrategy"]


class MeanTeacherStrategy(BaseStrategy):
    """Train a student against the predictions of its EMA teacher.

    Both models see the same augmented batch; the student's copy carries
    additional Gaussian noise. The teacher's final landmarks serve as pseudo
    ground truth, and with ``js`` set the channel distributions of the two
    feature maps are also pulled together.

    Parameters
    ----------
    trainer
        Settings of the training engine.
    loss
        Loss weights. ``w2`` is ignored unless ``js`` is set.
    js
        Whether to add the Jensen-Shannon feature consistency term.
    """

    uses_teacher = True

    def __init__(
        self, trainer: TrainerConfig, loss: LossConfig, *, js: bool = True
    ) -> None:
        if not js:
            loss = loss.copy(update={"w2": 0.0})
        super().__init__(trainer, loss)
        self._js = js

    @property
    def name(self) -> Strategy:
        return Strategy.mean_teacher_js if self._js else Strategy.mean_teacher

    def unlabeled_loss(
        self,
        state: TeacherStudentState,
        batch: Batch,
        context: TrainingContext,
        rng: np.random.Generator,
    ) -> Tensor:
        if state.teacher is None:
            raise InvalidArgumentError("Mean teacher training needs a teacher")
        with no_grad():
            teacher = context.forward(state.teacher, batch.images)
        noised = self._noised(batch.images, rng)
        student = context.forward(state.student, noised)
        return unlabeled_total(student, teacher, self.loss_config)
