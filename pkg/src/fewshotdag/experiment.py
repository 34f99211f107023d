"""Run experiments and write their outputs."""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Any

from .config import (
    ExperimentConfig,
    GenerationConfig,
    Strategy,
    write_snapshot,
)
from .dag.forward import predict_landmarks
from .dag.params import DagModelParams
from .evaluation.metrics import evaluate_model
from .evaluation.overlay import emit_overlay
from .evaluation.report import emit_report
from .exceptions import InvalidArgumentError, OutputPathError
from .factory import Factory
from .models.landmarks import GraphTopology, MeanShape
from .models.metrics import MetricSummary, ReportRow
from .models.samples import Dataset, Split
from .models.training import TrainingHistory
from .synthdata.generator import generate_dataset
from .synthdata.storage import read_dataset, write_dataset
from .training.checkpoint import Checkpoint, read_checkpoint, write_checkpoint
from .training.trainer import TrainingResult

__all__ = [
    "ABLATION_STRATEGIES",
    "CHECKPOINT_NAME",
    "HISTORY_NAME",
    "ExperimentRunner",
    "RunOutputs",
]

CHECKPOINT_NAME = "checkpoint.bin"
HISTORY_NAME = "history.json"

PRETRAIN_METHOD = "pretrain"
"""Method name reported for a checkpoint written by pretraining."""

ABLATION_STRATEGIES = (
    Strategy.supervised_only,
    Strategy.mean_teacher,
    Strategy.mean_teacher_js,
)
"""Strategies compared when the labeled set size varies."""


@dataclass
class RunOutputs:
    """Files written by one training run."""

    directory: Path
    """Directory holding every output of the run."""

    checkpoint: Path
    """Checkpoint of the selected parameters."""

    history: TrainingHistory
    """Losses and validation errors of the run."""

    def to_dict(self) -> dict[str, Any]:
        """Summarize for printing."""
        epochs = self.history.epochs
        final = epochs[-1].mean_loss if epochs else None
        return {
            "directory": str(self.directory),
            "checkpoint": str(self.checkpoint),
            "converged": self.history.converged,
            "best_epoch": self.history.best_epoch,
            "final_loss": final,
        }


@dataclass
class _Pretrained:
    params: DagModelParams
    mean_shape: MeanShape
    history: TrainingHistory


def _converged(pretrain: TrainingHistory, history: TrainingHistory) -> bool:
    finite = all(math.isfinite(e.mean_loss) for e in history.epochs)
    return pretrain.converged and finite


class ExperimentRunner:
    """Run the steps of an experiment described by one configuration.

    Every file is written below the configured output directory, next to a
    snapshot of the resolved configuration.

    Parameters
    ----------
    config
        Experiment configuration.
    factory
        Factory for trainers, by default one built from ``config``.
    """

    def __init__(
        self, config: ExperimentConfig, factory: Factory | None = None
    ) -> None:
        self._config = config
        self._factory = factory or Factory(config)

    @property
    def output_dir(self) -> Path:
        """Directory receiving every output."""
        return self._config.output_dir

    def resolve_output(self, path: Path | str) -> Path:
        """Resolve a path relative to the output directory.

        Parameters
        ----------
        path
            Relative path, or an absolute path inside the output directory.

        Returns
        -------
        pathlib.Path
            Absolute path.

        Raises
        ------
        OutputPathError
            Raised if the path is outside the output directory.
        """
        base = self.output_dir.resolve()
        resolved = (base / path).resolve()
        if not resolved.is_relative_to(base):
            msg = f"Output path {path} is outside {self.output_dir}"
            raise OutputPathError(msg)
        return resolved

    def load_dataset(self) -> Dataset:
        """Read the configured dataset, or generate it if none is set.

        Raises
        ------
        DatasetFormatError
            Raised if the dataset on disk is corrupt.
        InvalidArgumentError
            Raised if the dataset does not match the architecture.
        """
        data = self._config.data
        if data.path is not None:
            dataset = read_dataset(data.path)
        else:
            dataset = generate_dataset(
                data.generation, workers=self._config.trainer.loader_workers
            )
        architecture = self._config.architecture
        if dataset.num_landmarks != architecture.num_landmarks:
            msg = (
                f"Dataset has {dataset.num_landmarks} landmarks but the model"
                f" expects {architecture.num_landmarks}"
            )
            raise InvalidArgumentError(msg)
        size = architecture.image_size
        if dataset.image_size != (size, size):
            msg = (
                f"Dataset images are {dataset.image_size} but the model"
                f" expects {size}×{size}"
            )
            raise InvalidArgumentError(msg)
        return dataset

    def gen_data(
        self,
        generation: GenerationConfig | None = None,
        out: Path | str = "data",
    ) -> Path:
        """Generate a synthetic dataset and write it.

        Parameters
        ----------
        generation
            Generation settings, by default those of the configuration.
        out
            Dataset directory, relative to the output directory.

        Returns
        -------
        pathlib.Path
            Dataset directory.
        """
        if generation is None:
            generation = self._config.data.generation
        directory = self.resolve_output(out)
        dataset = generate_dataset(
            generation, workers=self._config.trainer.loader_workers
        )
        write_dataset(dataset, directory)
        write_snapshot(generation, directory)
        return directory

    def pretrain(self, dataset: Dataset | None = None) -> RunOutputs:
        """Pretrain on the labeled split and write the checkpoint."""
        if dataset is None:
            dataset = self.load_dataset()
        pretrained = self._pretrain(dataset)
        checkpoint = Checkpoint(
            student=pretrained.params,
            mean_shape=pretrained.mean_shape,
            edges=dataset.edges,
        )
        return self._write_run(PRETRAIN_METHOD, checkpoint, pretrained.history)

    def train_ssl(
        self,
        pretrained: Path | None = None,
        strategy: Strategy | None = None,
        dataset: Dataset | None = None,
    ) -> RunOutputs:
        """Train with a strategy starting from a pretrained model.

        Parameters
        ----------
        pretrained
            Checkpoint to start from. If not given, pretraining runs first
            and its outputs are written too.
        strategy
            Strategy to run, by default the configured one.
        dataset
            Dataset to train on, by default the configured one.

        Raises
        ------
        InvalidArgumentError
            Raised if the checkpoint architecture differs from the configured
            one.
        """
        if dataset is None:
            dataset = self.load_dataset()
        if pretrained is None:
            start = self._pretrain(dataset)
            checkpoint = Checkpoint(
                student=start.params,
                mean_shape=start.mean_shape,
                edges=dataset.edges,
            )
            self._write_run(PRETRAIN_METHOD, checkpoint, start.history)
        else:
            loaded = read_checkpoint(pretrained)
            if loaded.architecture != self._config.architecture:
                msg = (
                    f"Checkpoint {pretrained} was written for a different"
                    " architecture"
                )
                raise InvalidArgumentError(msg)
            start = _Pretrained(
                loaded.student, loaded.mean_shape, TrainingHistory()
            )
        result = self._train(dataset, start, strategy)
        return self._write_run(
            result.strategy.value,
            result.checkpoint(dataset.edges),
            result.history,
        )

    def evaluate(
        self, checkpoint: Path, dataset: Dataset | None = None
    ) -> tuple[MetricSummary, Path]:
        """Evaluate a checkpoint on the test split.

        Returns
        -------
        tuple
            Metric summary and the directory holding the report.
        """
        if dataset is None:
            dataset = self.load_dataset()
        loaded = read_checkpoint(checkpoint)
        summary = self._evaluate(loaded, dataset)
        method = loaded.strategy or PRETRAIN_METHOD
        row = ReportRow(method, self._config.seed, summary)
        directory = self.resolve_output("eval")
        emit_report([row], directory)
        write_snapshot(self._config, directory)
        return summary, directory

    def overlays(
        self,
        checkpoint: Path,
        count: int | None = None,
        dataset: Dataset | None = None,
    ) -> list[Path]:
        """Write SVG overlays of the first test samples.

        Parameters
        ----------
        checkpoint
            Model to predict with.
        count
            Number of samples, by default ``evaluation.overlay_count``.
        dataset
            Dataset to draw from, by default the configured one.

        Returns
        -------
        list of pathlib.Path
            Files written, one per sample.
        """
        if count is None:
            count = self._config.evaluation.overlay_count
        if dataset is None:
            dataset = self.load_dataset()
        loaded = read_checkpoint(checkpoint)
        samples = dataset.split(Split.test)[:count]
        if not samples:
            return []
        params = loaded.inference_params(
            use_teacher=self._config.evaluation.use_teacher
        )
        topology = GraphTopology.from_edges(
            loaded.architecture.num_landmarks, loaded.edges
        )
        predictions = predict_landmarks(
            params, [s.image for s in samples], loaded.mean_shape, topology
        )
        directory = self.resolve_output("overlays")
        paths = [
            emit_overlay(sample, prediction, directory / f"{sample.id}.svg")
            for sample, prediction in zip(samples, predictions, strict=True)
        ]
        write_snapshot(self._config, directory)
        logging.info(f"Wrote {len(paths)} overlays to {directory}")
        return paths

    def run_methods(
        self,
        strategies: Sequence[Strategy],
        dataset: Dataset | None = None,
        *,
        labeled_count: int | None = None,
    ) -> list[ReportRow]:
        """Pretrain once, then train and evaluate several strategies.

        Every run writes its outputs below the output directory. A row is
        marked as not converged if pretraining did not converge or the
        training loss became non-finite.

        Parameters
        ----------
        strategies
            Strategies to compare.
        dataset
            Dataset to use, by default the configured one.
        labeled_count
            Recorded in every row, for runs varying the labeled set.

        Returns
        -------
        list of ReportRow
            One row per strategy, evaluated on the test split.
        """
        if dataset is None:
            dataset = self.load_dataset()
        start = self._pretrain(dataset)
        pretrained = Checkpoint(
            student=start.params,
            mean_shape=start.mean_shape,
            edges=dataset.edges,
        )
        self._write_run(PRETRAIN_METHOD, pretrained, start.history)
        rows = []
        for strategy in strategies:
            result = self._train(dataset, start, strategy)
            checkpoint = result.checkpoint(dataset.edges)
            self._write_run(strategy.value, checkpoint, result.history)
            summary = self._evaluate(checkpoint, dataset)
            rows.append(
                ReportRow(
                    method=strategy.value,
                    seed=self._config.seed,
                    summary=summary,
                    converged=_converged(start.history, result.history),
                    labeled_count=labeled_count,
                )
            )
        return rows

    def reproduce_table(
        self, seeds: Sequence[int] = (0, 1, 2), jobs: int = 1
    ) -> tuple[list[ReportRow], Path]:
        """Compare every strategy over several seeds.

        Each seed pretrains once and trains all strategies, with the model
        initialization and the training randomness both set to the seed.
        The dataset is the same for every seed.

        Parameters
        ----------
        seeds
            Seeds to run.
        jobs
            Seeds run in parallel processes. The results do not depend on
            this.

        Returns
        -------
        tuple
            All rows and the directory holding the report.
        """
        if not seeds:
            raise InvalidArgumentError("Need at least one seed")
        dataset = self.load_dataset()
        directory = self.resolve_output("table")
        run = partial(
            _seed_rows, self._config, dataset, directory, list(Strategy)
        )
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(run, seeds))
        else:
            results = [run(seed) for seed in seeds]
        rows = [row for seed_rows in results for row in seed_rows]
        emit_report(rows, directory)
        write_snapshot(self._config, directory)
        return rows, directory

    def run_ablation(
        self,
        labeled_sizes: Sequence[int],
        strategies: Sequence[Strategy] = ABLATION_STRATEGIES,
    ) -> tuple[list[ReportRow], Path]:
        """Compare strategies as the number of labeled samples grows.

        Each size uses the first samples of the labeled split.

        Raises
        ------
        InvalidArgumentError
            Raised if a size is not positive or exceeds the labeled split.
        """
        if not labeled_sizes:
            raise InvalidArgumentError("Need at least one labeled set size")
        dataset = self.load_dataset()
        labeled = dataset.split(Split.labeled)
        for size in labeled_sizes:
            if not 0 < size <= len(labeled):
                msg = (
                    f"Cannot train on {size} labeled samples, dataset has"
                    f" {len(labeled)}"
                )
                raise InvalidArgumentError(msg)
        directory = self.resolve_output("ablation")
        rows = []
        for size in labeled_sizes:
            logging.info(f"Ablation with {size} labeled samples")
            runner = self._child(directory / f"labeled-{size}")
            subset = dataset.with_labeled(labeled[:size])
            rows.extend(
                runner.run_methods(strategies, subset, labeled_count=size)
            )
        emit_report(rows, directory)
        write_snapshot(self._config, directory)
        return rows, directory

    def _child(self, directory: Path) -> ExperimentRunner:
        config = self._config.copy(update={"output_dir": directory})
        return ExperimentRunner(config)

    def _pretrain(self, dataset: Dataset) -> _Pretrained:
        trainer = self._factory.create_trainer(Strategy.supervised_only)
        result = trainer.pretrain(
            dataset.split(Split.labeled),
            self._config.architecture,
            dataset.topology(),
            seed=self._config.seed,
            validation=dataset.split(Split.validation),
        )
        return _Pretrained(result.params, result.mean_shape, result.history)

    def _train(
        self,
        dataset: Dataset,
        start: _Pretrained,
        strategy: Strategy | None,
    ) -> TrainingResult:
        trainer = self._factory.create_trainer(strategy)
        return trainer.train(
            start.params,
            dataset.split(Split.labeled),
            dataset.split(Split.unlabeled),
            dataset.topology(),
            mean_shape=start.mean_shape,
            validation=dataset.split(Split.validation),
        )

    def _evaluate(
        self, checkpoint: Checkpoint, dataset: Dataset
    ) -> MetricSummary:
        settings = self._config.evaluation
        topology = GraphTopology.from_edges(
            checkpoint.architecture.num_landmarks, checkpoint.edges
        )
        return evaluate_model(
            checkpoint.inference_params(use_teacher=settings.use_teacher),
            dataset.split(Split.test),
            checkpoint.mean_shape,
            topology,
            settings,
        )

    def _write_run(
        self,
        name: str,
        checkpoint: Checkpoint,
        history: TrainingHistory,
    ) -> RunOutputs:
        directory = self.resolve_output(name)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / CHECKPOINT_NAME
        write_checkpoint(path, checkpoint)
        history_path = directory / HISTORY_NAME
        history_path.write_text(json.dumps(history.to_dict(), indent=2))
        write_snapshot(self._config, directory)
        logging.info(f"Wrote {name} outputs to {directory}")
        return RunOutputs(directory, path, history)


def _seed_rows(
    config: ExperimentConfig,
    dataset: Dataset,
    directory: Path,
    strategies: Sequence[Strategy],
    seed: int,
) -> list[ReportRow]:
    trainer = config.trainer.copy(update={"rng_seed": seed})
    seeded = config.copy(
        update={
            "seed": seed,
            "trainer": trainer,
            "output_dir": directory / f"seed-{seed}",
        }
    )
    logging.info(f"Running {len(strategies)} strategies with seed {seed}")
    return ExperimentRunner(seeded).run_methods(strategies, dataset)
