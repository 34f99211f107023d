"""Training on landmarks predicted once by the pretrained model."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from ...config import LossConfig, Strategy, TrainerConfig
from ...dag.forward import predict_landmarks
from ...dag.params import DagModelParams
from ...diffcore import Tensor
from ...exceptions import InvalidArgumentError
from ...models.samples import Sample
from ...models.training import TeacherStudentState
from ..batches import Batch
from .base import BaseStrategy, TrainingContext

__all__ = ["PseudoLabelStrategy"]


class PseudoLabelStrategy(BaseStrategy):
    """Treat frozen pretrained predictions as annotations.

    Before the first epoch the pretrained model labels every unlabeled
    sample. Those labels never change, and unlabeled batches are then
    trained with the supervised objective; augmentation moves the pseudo
    labels together with the images.
    """

    def __init__(self, trainer: TrainerConfig, loss: LossConfig) -> None:
        super().__init__(trainer, loss.copy(update={"w2": 0.0}))
        self._pool: list[Sample] = []

    @property
    def name(self) -> Strategy:
        return Strategy.pseudo_label

    def prepare(
        self, pretrained: DagModelParams, context: TrainingContext
    ) -> None:
        super().prepare(pretrained, context)
        predictions = predict_landmarks(
            pretrained,
            [s.image for s in context.unlabeled],
            context.mean_shape,
            context.topology,
        )
        self._pool = [
            sample.with_landmarks(landmarks)
            for sample, landmarks in zip(
                context.unlabeled, predictions, strict=True
            )
        ]

    def unlabeled_pool(self, context: TrainingContext) -> Sequence[Sample]:
        return self._pool

    def unlabeled_loss(
        self,
        state: TeacherStudentState,
        batch: Batch,
        context: TrainingContext,
        rng: np.random.Generator,
    ) -> Tensor:
        if batch.landmarks is None:
            raise InvalidArgumentError("Pseudo labels were not prepared")
        output = context.forward(state.student, batch.images)
        return self._supervised(output, batch.landmarks)
