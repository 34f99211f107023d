"""Tests for the component factory."""

from __future__ import annotations

from pathlib import Path

from fewshotdag.config import Strategy
from fewshotdag.factory import Factory
from fewshotdag.training.strategies import (
    MeanTeacherStrategy,
    PiModelStrategy,
    PseudoLabelStrategy,
    SupervisedStrategy,
    TemporalEnsembleStrategy,
)

from .support.builders import tiny_config


def test_create_strategy(tmp_path: Path) -> None:
    factory = Factory(tiny_config(tmp_path))

    expected = {
        Strategy.supervised_only: SupervisedStrategy,
        Strategy.pseudo_label: PseudoLabelStrategy,
        Strategy.pi_model: PiModelStrategy,
        Strategy.temporal_ensemble: TemporalEnsembleStrategy,
        Strategy.mean_teacher: MeanTeacherStrategy,
        Strategy.mean_teacher_js: MeanTeacherStrategy,
    }
    for strategy, cls in expected.items():
        created = factory.create_strategy(strategy)
        assert isinstance(created, cls)
        assert created.name == strategy

    assert factory.create_strategy().name == Strategy.mean_teacher_js


def test_create_trainer(tmp_path: Path) -> None:
    config = tiny_config(tmp_path)
    factory = Factory(config)

    trainer = factory.create_trainer(Strategy.pi_model)
    assert trainer.batch_size(3) == config.trainer.batch_size
