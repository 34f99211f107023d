"""Tests for the pretraining and semi-supervised training loops."""

from __future__ import annotations

import math
from typing import Any

import numpy as np
import pytest

from fewshotdag.config import EvaluationConfig, LossConfig, Strategy
from fewshotdag.dag.graph import compute_mean_shape
from fewshotdag.dag.params import DagModelParams
from fewshotdag.exceptions import InvalidArgumentError
from fewshotdag.models.samples import Split
from fewshotdag.models.training import StepKind
from fewshotdag.training.strategies import (
    BaseStrategy,
    MeanTeacherStrategy,
    PiModelStrategy,
    SupervisedStrategy,
)
from fewshotdag.training.trainer import SslTrainer

from ..support.builders import (
    random_samples,
    ring,
    tiny_architecture,
    tiny_trainer,
)


def _trainer(
    strategy: type[BaseStrategy] = SupervisedStrategy, **overrides: Any
) -> SslTrainer:
    config = tiny_trainer(**overrides)
    loss = LossConfig()
    return SslTrainer(strategy(config, loss), config, loss)


def _pretrained(seed: int = 0) -> DagModelParams:
    return DagModelParams.initialize(tiny_architecture(), seed)


def test_pretrain() -> None:
    labeled = random_samples(3)
    result = _trainer().pretrain(labeled, tiny_architecture(), ring(), seed=5)

    expected = compute_mean_shape([s.landmarks for s in labeled])
    assert np.array_equal(result.mean_shape.coords, expected.coords)
    assert len(result.history.epochs) == 2
    assert len(result.history.steps) == 4
    assert all(s.kind == StepKind.labeled for s in result.history.steps)
    assert all(s.alpha is None for s in result.history.steps)
    assert all(math.isfinite(r.mean_loss) for r in result.history.epochs)
    assert not result.params.equals(
        DagModelParams.initialize(tiny_architecture(), 5)
    )


def test_pretrain_is_deterministic() -> None:
    labeled = random_samples(3)
    first = _trainer().pretrain(labeled, tiny_architecture(), ring(), seed=1)
    second = _trainer().pretrain(labeled, tiny_architecture(), ring(), seed=1)
    other = _trainer(rng_seed=9).pretrain(
        labeled, tiny_architecture(), ring(), seed=1
    )

    assert first.params.equals(second.params)
    assert not first.params.equals(other.params)


def test_pretrain_leaves_initial_untouched() -> None:
    initial = _pretrained()
    copy = initial.copy()
    _trainer().pretrain(
        random_samples(3), tiny_architecture(), ring(), initial=initial
    )

    assert initial.equals(copy)


def test_supervised_training_continues_pretraining() -> None:
    labeled = random_samples(3)
    initial = _pretrained()
    pretrain = _trainer().pretrain(
        labeled, tiny_architecture(), ring(), initial=initial
    )
    trained = _trainer().train(initial, labeled, [], ring())

    assert trained.strategy == Strategy.supervised_only
    assert trained.state.teacher is None
    assert trained.state.student.equals(pretrain.params)
    assert trained.history.best_epoch == 1


def test_batch_ratio() -> None:
    labeled = random_samples(3)
    unlabeled = random_samples(8, seed=1, split=Split.unlabeled)
    trainer = _trainer(MeanTeacherStrategy)
    result = trainer.train(_pretrained(), labeled, unlabeled, ring())

    kinds = [s.kind for s in result.history.steps]
    assert kinds == [
        StepKind.labeled,
        StepKind.unlabeled,
        StepKind.unlabeled,
    ] * 4
    assert result.state.step == 12
    assert result.state.teacher is not None
    assert all(s.alpha == 0.99 for s in result.history.steps)
    assert not result.state.teacher.equals(result.state.student)


def test_pi_model_has_no_teacher() -> None:
    labeled = random_samples(3)
    unlabeled = random_samples(4, seed=1, split=Split.unlabeled)
    result = _trainer(PiModelStrategy).train(
        _pretrained(), labeled, unlabeled, ring()
    )

    assert result.state.teacher is None
    assert all(s.alpha is None for s in result.history.steps)
    checkpoint = result.checkpoint(ring().edges)
    assert checkpoint.teacher is None
    assert checkpoint.strategy == "pi_model"


def test_training_is_deterministic() -> None:
    labeled = random_samples(3)
    unlabeled = random_samples(4, seed=1, split=Split.unlabeled)
    results = [
        _trainer(MeanTeacherStrategy).train(
            _pretrained(), labeled, unlabeled, ring()
        )
        for _ in range(2)
    ]

    assert results[0].state.student.equals(results[1].state.student)
    teachers = [r.state.teacher for r in results]
    assert teachers[0] is not None
    assert teachers[1] is not None
    assert teachers[0].equals(teachers[1])
    losses = [[s.loss for s in r.history.steps] for r in results]
    assert losses[0] == losses[1]


def test_threaded_loading_matches_inline() -> None:
    labeled = random_samples(3)
    unlabeled = random_samples(4, seed=1, split=Split.unlabeled)
    inline = _trainer(MeanTeacherStrategy).train(
        _pretrained(), labeled, unlabeled, ring()
    )
    threaded = _trainer(MeanTeacherStrategy, loader_workers=2).train(
        _pretrained(), labeled, unlabeled, ring()
    )

    assert inline.state.student.equals(threaded.state.student)


def test_validation_selects_epoch() -> None:
    labeled = random_samples(3)
    validation = random_samples(2, seed=2, split=Split.validation)
    config = tiny_trainer(epochs=3)
    loss = LossConfig()
    trainer = SslTrainer(
        SupervisedStrategy(config, loss),
        config,
        loss,
        EvaluationConfig(),
    )
    result = trainer.train(
        _pretrained(), labeled, [], ring(), validation=validation
    )

    errors = [r.validation_error for r in result.history.epochs]
    assert all(e is not None for e in errors)
    best = result.history.best_epoch
    assert best is not None
    assert errors[best] == min(e for e in errors if e is not None)


def test_errors() -> None:
    labeled = random_samples(3)
    unlabeled = random_samples(2, split=Split.unlabeled)

    with pytest.raises(InvalidArgumentError):
        _trainer().pretrain([], tiny_architecture(), ring())
    with pytest.raises(InvalidArgumentError):
        _trainer().pretrain(unlabeled, tiny_architecture(), ring())
    with pytest.raises(InvalidArgumentError):
        _trainer(MeanTeacherStrategy).train(_pretrained(), labeled, [], ring())
    with pytest.raises(InvalidArgumentError):
        _trainer().train(_pretrained(), [], unlabeled, ring())


def test_batch_size() -> None:
    assert _trainer(batch_size=3).batch_size(100) == 3
    assert _trainer(batch_size=None).batch_size(1) == 1
    assert _trainer(batch_size=None).batch_size(5) == 4
