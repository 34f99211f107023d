"""Representations of training state and history."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from ..dag.params import DagModelParams

__all__ = [
    "EpochRecord",
    "StepKind",
    "StepRecord",
    "TeacherStudentState",
    "TrainingHistory",
]


class StepKind(str, Enum):
    """Kind of batch a training step consumed."""

    labeled = "labeled"
    unlabeled = "unlabeled"


@dataclass
class TeacherStudentState:
    """Parameters being trained plus the global step counter.

    Strategies that keep a single model leave ``teacher`` unset.
    """

    student: DagModelParams
    """Parameters updated by the optimizer."""

    teacher: DagModelParams | None = None
    """EMA of the student, if the strategy uses one."""

    step: int = 0
    """Number of student updates so far."""


@dataclass(frozen=True)
class StepRecord:
    """Outcome of one optimizer step."""

    epoch: int
    kind: StepKind
    loss: float
    lr: float
    alpha: float | None = None
    """EMA factor applied after the step, if there is a teacher."""


@dataclass(frozen=True)
class EpochRecord:
    """Summary of one training epoch."""

    epoch: int
    mean_loss: float
    validation_error: float | None = None
    """Mean validation error in pixels, if there is a validation set."""


@dataclass
class TrainingHistory:
    """Everything recorded during one training run."""

    steps: list[StepRecord] = field(default_factory=list)
    epochs: list[EpochRecord] = field(default_factory=list)

    converged: bool = True
    """Whether the final epoch loss is finite and below the first one."""

    best_epoch: int | None = None
    """Epoch with the lowest validation error, if validated."""

    def check_convergence(self) -> bool:
        """Recompute and store ``converged`` from the epoch losses."""
        if not self.epochs:
            self.converged = True
            return True
        first = self.epochs[0].mean_loss
        last = self.epochs[-1].mean_loss
        finite = all(math.isfinite(r.mean_loss) for r in self.epochs)
        if len(self.epochs) == 1:
            self.converged = finite
        else:
            self.converged = finite and last < first
        return self.converged

    def to_dict(self) -> dict[str, Any]:
        """Convert to a JSON-compatible dict."""
        return {
            "converged": self.converged,
            "best_epoch": self.best_epoch,
            "epochs": [asdict(r) for r in self.epochs],
            "steps": [
                {**asdict(r), "kind": r.kind.value} for r in self.steps
            ],
        }
