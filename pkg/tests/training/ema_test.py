"""Tests for the teacher moving average."""

from __future__ import annotations

import numpy as np
import pytest

from fewshotdag.dag.params import DagModelParams
from fewshotdag.exceptions import InvalidArgumentError
from fewshotdag.models.training import TeacherStudentState
from fewshotdag.training.ema import ema_update
from fewshotdag.training.schedule import alpha_schedule

from ..support.builders import tiny_architecture


def _state(seed: int = 0) -> TeacherStudentState:
    architecture = tiny_architecture()
    return TeacherStudentState(
        student=DagModelParams.initialize(architecture, seed),
        teacher=DagModelParams.initialize(architecture, seed + 100),
    )


def test_degenerate_factors() -> None:
    state = _state()
    assert state.teacher is not None
    original = state.teacher.copy()

    ema_update(state, 1.0)
    assert state.teacher.equals(original)

    ema_update(state, 0.0)
    assert state.teacher.equals(state.student)


def test_student_untouched() -> None:
    state = _state()
    student = state.student.copy()
    ema_update(state, 0.5)

    assert state.student.equals(student)


def test_blend() -> None:
    state = _state()
    assert state.teacher is not None
    old = state.teacher["global.0.self"].data.copy()
    new = state.student["global.0.self"].data

    ema_update(state, 0.99)
    expected = 0.99 * old + 0.01 * new
    assert np.allclose(
        state.teacher["global.0.self"].data, expected, rtol=0, atol=1e-15
    )


def test_convex_envelope() -> None:
    state = _state(1)
    assert state.teacher is not None
    rng = np.random.default_rng(1)
    low = {n: t.data.copy() for n, t in state.teacher.named_parameters()}
    high = {n: t.data.copy() for n, t in state.teacher.named_parameters()}

    for step in range(1000):
        for _, tensor in state.student.named_parameters():
            tensor.data = tensor.data + rng.normal(0.0, 0.1, tensor.shape)
        for name, tensor in state.student.named_parameters():
            low[name] = np.minimum(low[name], tensor.data)
            high[name] = np.maximum(high[name], tensor.data)
        ema_update(state, alpha_schedule(step))
        for name, tensor in state.teacher.named_parameters():
            assert np.all(tensor.data >= low[name])
            assert np.all(tensor.data <= high[name])


def test_errors() -> None:
    state = _state()
    with pytest.raises(InvalidArgumentError):
        ema_update(state, 1.5)
    with pytest.raises(InvalidArgumentError):
        ema_update(state, -0.1)
    with pytest.raises(InvalidArgumentError):
        ema_update(TeacherStudentState(student=state.student), 0.5)

    wider = DagModelParams.initialize(tiny_architecture(gcn_width=4), 0)
    with pytest.raises(InvalidArgumentError):
        ema_update(TeacherStudentState(state.student, wider), 0.5)
