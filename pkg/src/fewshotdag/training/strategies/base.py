"""Base class for a training strategy."""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from ...config import LossConfig, Strategy, TrainerConfig
from ...dag.forward import DagOutput, dag_forward, image_batch
from ...dag.params import DagModelParams
from ...diffcore import Array, Tensor
from ...exceptions import InvalidArgumentError
from ...losses import supervised_total
from ...models.landmarks import GraphTopology, MeanShape
from ...models.samples import Sample
from ...models.training import TeacherStudentState
from ...synthdata.augment import add_gaussian_noise
from ..batches import Batch

__all__ = [
    "BaseStrategy",
    "TrainingContext",
]


@dataclass
class TrainingContext:
    """Data and settings shared by every step of a run."""

    labeled: Sequence[Sample]
    """Annotated training samples."""

    unlabeled: Sequence[Sample]
    """Training samples without annotation."""

    mean_shape: MeanShape
    """Starting shape, computed from the labeled samples."""

    topology: GraphTopology
    """Landmark graph."""

    validation: Sequence[Sample] = field(default_factory=list)
    """Annotated samples for model selection."""

    def forward(self, params: DagModelParams, images: Array) -> DagOutput:
        """Run the model on a ``B×H×W`` stack of images."""
        return dag_forward(
            image_batch(images, params), params, self.mean_shape, self.topology
        )


class BaseStrategy(ABC):
    """One way of using labeled and unlabeled batches to train a model.

    Parameters
    ----------
    trainer
        Settings of the training engine.
    loss
        Loss weights.
    """

    uses_teacher = False
    """Whether the run keeps an EMA teacher next to the student."""

    uses_unlabeled = True
    """Whether the run consumes unlabeled batches."""

    def __init__(self, trainer: TrainerConfig, loss: LossConfig) -> None:
        self._trainer = trainer
        self._loss = loss

    @property
    @abstractmethod
    def name(self) -> Strategy:
        """Strategy implemented by this class."""

    @property
    def loss_config(self) -> LossConfig:
        """Loss weights in effect for this strategy."""
        return self._loss

    def initial_state(
        self, pretrained: DagModelParams
    ) -> TeacherStudentState:
        """Create the training state from a pretrained model.

        The pretrained parameters themselves are never modified.
        """
        teacher = pretrained.copy() if self.uses_teacher else None
        return TeacherStudentState(student=pretrained.copy(), teacher=teacher)

    def prepare(
        self, pretrained: DagModelParams, context: TrainingContext
    ) -> None:
        """Do any work needed once before the first epoch."""
        if self.uses_unlabeled and not context.unlabeled:
            msg = f"Strategy {self.name.value} needs unlabeled samples"
            raise InvalidArgumentError(msg)

    def start_epoch(
        self,
        state: TeacherStudentState,
        context: TrainingContext,
        epoch: int,
    ) -> None:
        """Do any work needed at the start of an epoch."""

    def unlabeled_pool(self, context: TrainingContext) -> Sequence[Sample]:
        """Return the samples served as unlabeled batches this epoch."""
        return context.unlabeled

    def labeled_loss(
        self,
        state: TeacherStudentState,
        batch: Batch,
        context: TrainingContext,
    ) -> Tensor:
        """Compute the student's supervised objective on a labeled batch."""
        if batch.landmarks is None:
            raise InvalidArgumentError("Labeled batch has no landmarks")
        output = context.forward(state.student, batch.images)
        return self._supervised(output, batch.landmarks)

    @abstractmethod
    def unlabeled_loss(
        self,
        state: TeacherStudentState,
        batch: Batch,
        context: TrainingContext,
        rng: np.random.Generator,
    ) -> Tensor:
        """Compute the student's objective on an unlabeled batch.

        Parameters
        ----------
        state
            Current parameters.
        batch
            Augmented unlabeled batch.
        context
            Run data and settings.
        rng
            Source of the input noise of this step.
        """

    def _supervised(self, output: DagOutput, landmarks: Array) -> Tensor:
        return supervised_total(
            output.v_global,
            output.v_local,
            Tensor(landmarks, dtype=output.v_local.dtype),
            self.loss_config,
            intermediate=output.v_local_steps[:-1],
        )

    def _noised(self, images: Array, rng: np.random.Generator) -> Array:
        return add_gaussian_noise(images, self._trainer.noise_sigma, rng)
