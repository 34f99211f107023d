"""Single-model consistency between clean and noised inputs."""

from __future__ import annotations

import numpy as np

from ...config import LossConfig, Strategy, TrainerConfig
from ...diffcore import Tensor, no_grad
from ...losses import unlabeled_total
from ...models.training import TeacherStudentState
from ..batches import Batch
from .base import BaseStrategy, TrainingContext

__all__ = ["PiModelStrategy"]


class PiModelStrategy(BaseStrategy):
    """Match the model's noised prediction to its own clean prediction.

    Only one parameter set exists. The clean forward pass is recorded
    without gradients and acts as the target of the landmark losses.
    """

    def __init__(self, trainer: TrainerConfig, loss: LossConfig) -> None:
        super().__init__(trainer, loss.copy(update={"w2": 0.0}))

    @property
    def name(self) -> Strategy:
        return Strategy.pi_model

    def unlabeled_loss(
        self,
        state: TeacherStudentState,
        batch: Batch,
        context: TrainingContext,
        rng: np.random.Generator,
    ) -> Tensor:
        with no_grad():
            target = context.forward(state.student, batch.images)
        noised = self._noised(batch.images, rng)
        output = context.forward(state.student, noised)
        return unlabeled_total(output, target, self.loss_config)
