"""Supervised pretraining and semi-supervised training loops."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from functools import partial

import numpy as np

from ..config import (
    ArchitectureConfig,
    EvaluationConfig,
    LossConfig,
    Strategy,
    TrainerConfig,
)
from ..dag.graph import compute_mean_shape
from ..dag.params import DagModelParams
from ..diffcore import Tape
from ..evaluation.metrics import evaluate_model
from ..exceptions import InvalidArgumentError
from ..models.landmarks import GraphTopology, MeanShape
from ..models.samples import Sample
from ..models.training import (
    EpochRecord,
    StepKind,
    StepRecord,
    TeacherStudentState,
    TrainingHistory,
)
from .batches import Batch, BatchLoader, prefetch
from .checkpoint import Checkpoint
from .ema import ema_update
from .optimizer import OptimizerState, adam_step
from .schedule import (
    BatchSlot,
    alpha_schedule,
    build_batch_schedule,
    default_batch_size,
    lr_at_epoch,
)
from .strategies.base import BaseStrategy, TrainingContext
from .strategies.supervised import SupervisedStrategy

__all__ = [
    "PretrainResult",
    "SslTrainer",
    "TrainingResult",
]

_LABELED_STREAM = 0
_UNLABELED_STREAM = 1
_NOISE_STREAM = 2


@dataclass
class PretrainResult:
    """Outcome of supervised pretraining."""

    params: DagModelParams
    """Parameters after the final epoch."""

    mean_shape: MeanShape
    """Mean shape of the labeled samples."""

    history: TrainingHistory
    """Losses and validation errors."""


@dataclass
class TrainingResult:
    """Outcome of semi-supervised training."""

    strategy: Strategy
    """Strategy that was run."""

    state: TeacherStudentState
    """Parameters at the selected epoch."""

    optimizer: OptimizerState
    """Optimizer state at the selected epoch."""

    mean_shape: MeanShape
    """Starting shape used throughout."""

    history: TrainingHistory
    """Every step and epoch of the run."""

    def checkpoint(self, edges: Sequence[tuple[int, int]]) -> Checkpoint:
        """Package the selected state for writing."""
        return Checkpoint(
            student=self.state.student,
            teacher=self.state.teacher,
            optimizer=self.optimizer,
            step=self.state.step,
            mean_shape=self.mean_shape,
            edges=tuple(edges),
            strategy=self.strategy.value,
        )


@dataclass
class _Snapshot:
    state: TeacherStudentState
    optimizer: OptimizerState
    epoch: int | None


def _copy_state(state: TeacherStudentState) -> TeacherStudentState:
    teacher = state.teacher.copy() if state.teacher is not None else None
    return TeacherStudentState(
        student=state.student.copy(), teacher=teacher, step=state.step
    )


class SslTrainer:
    """Run a training strategy.

    Parameters
    ----------
    strategy
        Strategy used by `train`. `pretrain` always trains supervised.
    trainer
        Settings of the training engine.
    loss
        Loss weights used for supervised steps.
    evaluation
        Settings used to compute validation errors.
    """

    def __init__(
        self,
        strategy: BaseStrategy,
        trainer: TrainerConfig,
        loss: LossConfig,
        evaluation: EvaluationConfig | None = None,
    ) -> None:
        self._strategy = strategy
        self._config = trainer
        self._loss = loss
        self._evaluation = evaluation or EvaluationConfig()

    def batch_size(self, n_labeled: int) -> int:
        """Return the configured batch size or the default for the set."""
        if self._config.batch_size is not None:
            return self._config.batch_size
        return default_batch_size(n_labeled)

    def pretrain(
        self,
        labeled: Sequence[Sample],
        architecture: ArchitectureConfig,
        topology: GraphTopology,
        *,
        seed: int = 0,
        initial: DagModelParams | None = None,
        validation: Sequence[Sample] = (),
    ) -> PretrainResult:
        """Train a model on labeled samples only.

        Parameters
        ----------
        labeled
            Annotated samples; the mean shape is computed from them.
        architecture
            Architecture of a freshly initialized model.
        topology
            Landmark graph.
        seed
            Seed of the initialization.
        initial
            Parameters to start from instead of a fresh model. They are not
            modified.
        validation
            If given, the validation error is recorded every epoch.

        Returns
        -------
        PretrainResult
            Final parameters. Non-convergence is reported as a warning and
            recorded in the history.

        Raises
        ------
        InvalidArgumentError
            Raised if there are no labeled samples.
        """
        if not labeled:
            raise InvalidArgumentError("Pretraining needs labeled samples")
        _check_labels(labeled)
        mean_shape = _mean_shape(labeled)
        if initial is None:
            initial = DagModelParams.initialize(architecture, seed)
        context = TrainingContext(
            labeled=labeled,
            unlabeled=[],
            mean_shape=mean_shape,
            topology=topology,
            validation=validation,
        )
        strategy = SupervisedStrategy(self._config, self._loss)
        state = strategy.initial_state(initial)
        epochs = self._config.pretrain_epochs
        logging.info(
            f"Pretraining on {len(labeled)} samples for {epochs} epochs"
        )
        history, _ = self._run(strategy, state, context, epochs, select=False)
        if not history.check_convergence():
            logging.warning("Supervised pretraining did not converge")
        logging.info("Pretraining finished")
        return PretrainResult(state.student, mean_shape, history)

    def train(
        self,
        pretrained: DagModelParams,
        labeled: Sequence[Sample],
        unlabeled: Sequence[Sample],
        topology: GraphTopology,
        *,
        mean_shape: MeanShape | None = None,
        validation: Sequence[Sample] = (),
    ) -> TrainingResult:
        """Train from a pretrained model with the configured strategy.

        Parameters
        ----------
        pretrained
            Starting parameters for the student and, if any, the teacher.
            They are not modified.
        labeled
            Annotated samples.
        unlabeled
            Samples without annotation.
        topology
            Landmark graph.
        mean_shape
            Starting shape, by default computed from the labeled samples.
        validation
            Samples used to select the returned epoch. Without them the last
            epoch is returned.

        Returns
        -------
        TrainingResult
            State at the epoch with the lowest validation error.

        Raises
        ------
        InvalidArgumentError
            Raised if there are no labeled samples, or no unlabeled samples
            for a strategy that needs them.
        """
        if not labeled:
            raise InvalidArgumentError("Training needs labeled samples")
        _check_labels(labeled)
        if mean_shape is None:
            mean_shape = _mean_shape(labeled)
        context = TrainingContext(
            labeled=labeled,
            unlabeled=unlabeled,
            mean_shape=mean_shape,
            topology=topology,
            validation=validation,
        )
        strategy = self._strategy
        strategy.prepare(pretrained, context)
        state = strategy.initial_state(pretrained)
        epochs = self._config.epochs
        name = strategy.name.value
        logging.info(f"Training {name} for {epochs} epochs")
        if not validation:
            logging.warning("No validation samples, keeping the last epoch")
        history, best = self._run(strategy, state, context, epochs)
        history.check_convergence()
        logging.info(f"Training {name} finished at epoch {best.epoch}")
        return TrainingResult(
            strategy=strategy.name,
            state=best.state,
            optimizer=best.optimizer,
            mean_shape=mean_shape,
            history=history,
        )

    def _selected_params(self, state: TeacherStudentState) -> DagModelParams:
        if self._evaluation.use_teacher and state.teacher is not None:
            return state.teacher
        return state.student

    def _schedule(
        self,
        strategy: BaseStrategy,
        context: TrainingContext,
    ) -> tuple[list[BatchSlot], dict[StepKind, BatchLoader]]:
        config = self._config
        size = self.batch_size(len(context.labeled))
        box = context.mean_shape.bounding_box()
        loader = partial(
            BatchLoader,
            batch_size=size,
            seed=config.rng_seed,
            augment=config.augment,
            box=box,
        )
        labeled = loader(context.labeled, stream=_LABELED_STREAM)
        loaders = {StepKind.labeled: labeled}
        if not strategy.uses_unlabeled:
            slots = [
                BatchSlot(StepKind.labeled, i)
                for i in range(labeled.batches_per_pass)
            ]
            return slots, loaders
        pool = strategy.unlabeled_pool(context)
        unlabeled = loader(pool, stream=_UNLABELED_STREAM)
        loaders[StepKind.unlabeled] = unlabeled
        slots = build_batch_schedule(
            labeled.batches_per_pass,
            config.ratio,
            unlabeled.batches_per_pass,
        )
        return slots, loaders

    def _run(
        self,
        strategy: BaseStrategy,
        state: TeacherStudentState,
        context: TrainingContext,
        epochs: int,
        *,
        select: bool = True,
    ) -> tuple[TrainingHistory, _Snapshot]:
        config = self._config
        history = TrainingHistory()
        optimizer = OptimizerState.zeros_like(state.student.parameters())
        best = _Snapshot(state, optimizer, None)
        best_error = math.inf

        for epoch in range(epochs):
            lr = lr_at_epoch(epoch, config)
            strategy.start_epoch(state, context, epoch)
            slots, loaders = self._schedule(strategy, context)
            jobs = [
                partial(loaders[slot.kind].batch, epoch, slot.index)
                for slot in slots
            ]
            batches = prefetch(jobs, config.loader_workers)
            losses = []
            for position, (slot, batch) in enumerate(
                zip(slots, batches, strict=True)
            ):
                rng = np.random.default_rng(
                    [config.rng_seed, _NOISE_STREAM, epoch, position]
                )
                record = self._step(
                    strategy,
                    state,
                    optimizer,
                    context,
                    slot.kind,
                    batch,
                    lr=lr,
                    epoch=epoch,
                    rng=rng,
                )
                history.steps.append(record)
                losses.append(record.loss)
            mean_loss = math.fsum(losses) / len(losses)

            error = None
            if context.validation:
                summary = evaluate_model(
                    self._selected_params(state),
                    context.validation,
                    context.mean_shape,
                    context.topology,
                    self._evaluation,
                )
                error = summary.mean
            history.epochs.append(EpochRecord(epoch, mean_loss, error))
            logging.info(
                f"Epoch {epoch}: mean loss {mean_loss:.6g},"
                f" validation error {error}"
            )
            if select and error is not None and error < best_error:
                best_error = error
                best = _Snapshot(_copy_state(state), optimizer.copy(), epoch)
                history.best_epoch = epoch

        if select and best.epoch is None and epochs > 0:
            best = _Snapshot(state, optimizer, epochs - 1)
            history.best_epoch = epochs - 1
        return history, best

    def _step(
        self,
        strategy: BaseStrategy,
        state: TeacherStudentState,
        optimizer: OptimizerState,
        context: TrainingContext,
        kind: StepKind,
        batch: Batch,
        *,
        lr: float,
        epoch: int,
        rng: np.random.Generator,
    ) -> StepRecord:
        params = state.student.parameters()
        for param in params:
            param.grad = None
        with Tape() as tape:
            if kind == StepKind.labeled:
                loss = strategy.labeled_loss(state, batch, context)
            else:
                loss = strategy.unlabeled_loss(state, batch, context, rng)
            value = loss.item()
            if not math.isfinite(value):
                logging.warning(
                    f"Skipping update at step {state.step}: loss is {value}"
                )
                return StepRecord(epoch, kind, value, lr)
            tape.backward(loss)

        grads = [
            p.grad if p.grad is not None else np.zeros_like(p.data)
            for p in params
        ]
        adam_step(params, grads, optimizer, lr, self._config.weight_decay)
        alpha = None
        if state.teacher is not None:
            alpha = alpha_schedule(state.step)
            ema_update(state, alpha)
        state.step += 1
        return StepRecord(epoch, kind, value, lr, alpha)


def _check_labels(samples: Sequence[Sample]) -> None:
    for sample in samples:
        if sample.landmarks is None:
            msg = f"Labeled sample {sample.id} has no landmarks"
            raise InvalidArgumentError(msg)


def _mean_shape(samples: Sequence[Sample]) -> MeanShape:
    return compute_mean_shape(
        [s.landmarks for s in samples if s.landmarks is not None]
    )
