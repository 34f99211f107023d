"""Exponential moving average of the student into the teacher."""

from __future__ import annotations

import numpy as np

from ..exceptions import InvalidArgumentError
from ..models.training import TeacherStudentState

__all__ = ["ema_update"]


def ema_update(state: TeacherStudentState, alpha: float) -> None:
    """Move every teacher parameter towards the student.

    Each teacher value becomes ``alpha·θ_T + (1 − alpha)·θ_S``, kept inside
    the closed interval spanned by the old teacher value and the student
    value. The student is not modified.

    Parameters
    ----------
    state
        Training state whose teacher is updated in place.
    alpha
        EMA factor in ``[0, 1]``.

    Raises
    ------
    InvalidArgumentError
        Raised if ``alpha`` is outside ``[0, 1]`` or the state has no teacher.
    """
    if not 0 <= alpha <= 1:
        raise InvalidArgumentError(f"EMA factor {alpha} outside [0, 1]")
    teacher = state.teacher
    if teacher is None:
        raise InvalidArgumentError("Training state has no teacher")
    if teacher.architecture != state.student.architecture:
        raise InvalidArgumentError("Teacher and student architectures differ")
    for name, tensor in teacher.named_parameters():
        old = tensor.data
        new = state.student[name].data
        blended = alpha * old + (1 - alpha) * new
        low = np.minimum(old, new)
        high = np.maximum(old, new)
        tensor.data = np.clip(blended, low, high).astype(old.dtype)
