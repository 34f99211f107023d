"""Training on per-sample moving averages of past predictions."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from ...config import LossConfig, Strategy, TrainerConfig
from ...dag.forward import predict_landmarks
from ...dag.params import DagModelParams
from ...diffcore import Array, Tensor
from ...exceptions import InvalidArgumentError
from ...models.landmarks import LandmarkSet
from ...models.samples import Sample
from ...models.training import TeacherStudentState
from ..batches import Batch
from .base import BaseStrategy, TrainingContext

__all__ = ["TemporalEnsembleStrategy"]


class TemporalEnsembleStrategy(BaseStrategy):
    """Supervise unlabeled samples with an ensemble of earlier predictions.

    Targets start as the pretrained model's predictions. At the start of
    every later epoch each target becomes ``α·target + (1 − α)·prediction``
    with the current model's clean prediction, ``α`` being
    ``trainer.ema_alpha``.
    """

    def __init__(self, trainer: TrainerConfig, loss: LossConfig) -> None:
        super().__init__(trainer, loss.copy(update={"w2": 0.0}))
        self._targets: Array | None = None

    @property
    def name(self) -> Strategy:
        return Strategy.temporal_ensemble

    @property
    def targets(self) -> Array | None:
        """Current ensembled targets, ``N×K×2`` in unlabeled order."""
        return self._targets

    def prepare(
        self, pretrained: DagModelParams, context: TrainingContext
    ) -> None:
        super().prepare(pretrained, context)
        self._targets = self._predict(pretrained, context)

    def start_epoch(
        self,
        state: TeacherStudentState,
        context: TrainingContext,
        epoch: int,
    ) -> None:
        if epoch == 0 or self._targets is None:
            return
        alpha = self._trainer.ema_alpha
        current = self._predict(state.student, context)
        self._targets = alpha * self._targets + (1 - alpha) * current

    def unlabeled_pool(self, context: TrainingContext) -> Sequence[Sample]:
        if self._targets is None:
            raise InvalidArgumentError("Ensemble targets were not prepared")
        return [
            sample.with_landmarks(LandmarkSet(target))
            for sample, target in zip(
                context.unlabeled, self._targets, strict=True
            )
        ]

    def unlabeled_loss(
        self,
        state: TeacherStudentState,
        batch: Batch,
        context: TrainingContext,
        rng: np.random.Generator,
    ) -> Tensor:
        if batch.landmarks is None:
            raise InvalidArgumentError("Ensemble targets missing from batch")
        output = context.forward(state.student, batch.images)
        return self._supervised(output, batch.landmarks)

    def _predict(
        self, params: DagModelParams, context: TrainingContext
    ) -> Array:
        predictions = predict_landmarks(
            params,
            [s.image for s in context.unlabeled],
            context.mean_shape,
            context.topology,
        )
        return np.stack([p.coords for p in predictions])
