"""Training strategies."""

from .base import BaseStrategy, TrainingContext
from .mean_teacher import MeanTeacherStrategy
from .pi_model import PiModelStrategy
from .pseudo_label import PseudoLabelStrategy
from .supervised import SupervisedStrategy
from .temporal_ensemble import TemporalEnsembleStrategy

__all__ = [
    "BaseStrategy",
    "MeanTeacherStrategy",
    "PiModelStrategy",
    "PseudoLabelStrategy",
    "SupervisedStrategy",
    "TemporalEnsembleStrategy",
    "TrainingContext",
]
