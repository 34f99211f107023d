"""Factory for fewshotdag components."""

from __future__ import annotations

from .config import ExperimentConfig, Strategy
from .training.strategies import (
    BaseStrategy,
    MeanTeacherStrategy,
    PiModelStrategy,
    PseudoLabelStrategy,
    SupervisedStrategy,
    TemporalEnsembleStrategy,
)
from .training.trainer import SslTrainer

__all__ = ["Factory"]


class Factory:
    """Factory to create fewshotdag components.

    Parameters
    ----------
    config
        Experiment configuration the components are built from.
    """

    def __init__(self, config: ExperimentConfig) -> None:
        self._config = config

    def create_strategy(
        self, strategy: Strategy | None = None
    ) -> BaseStrategy:
        """Create a training strategy.

        Parameters
        ----------
        strategy
            Strategy to create, by default the configured one.

        Returns
        -------
        BaseStrategy
            New strategy.
        """
        if strategy is None:
            strategy = self._config.trainer.strategy
        trainer = self._config.trainer
        loss = self._config.loss
        if strategy == Strategy.supervised_only:
            return SupervisedStrategy(trainer, loss)
        elif strategy == Strategy.pseudo_label:
            return PseudoLabelStrategy(trainer, loss)
        elif strategy == Strategy.pi_model:
            return PiModelStrategy(trainer, loss)
        elif strategy == Strategy.temporal_ensemble:
            return TemporalEnsembleStrategy(trainer, loss)
        elif strategy == Strategy.mean_teacher:
            return MeanTeacherStrategy(trainer, loss, js=False)
        else:
            return MeanTeacherStrategy(trainer, loss, js=True)

    def create_trainer(self, strategy: Strategy | None = None) -> SslTrainer:
        """Create a trainer running one strategy.

        Parameters
        ----------
        strategy
            Strategy used by `SslTrainer.train`, by default the configured
            one.

        Returns
        -------
        SslTrainer
            New trainer.
        """
        return SslTrainer(
            self.create_strategy(strategy),
            self._config.trainer,
            self._config.loss,
            self._config.evaluation,
        )
