"""Tests for the finite-difference gradient check."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import pytest

from fewshotdag import diffcore as dc
from fewshotdag.diffcore import Tensor, finite_diff_check
from fewshotdag.exceptions import InvalidArgumentError
from fewshotdag.losses import kl_divergence


def test_linear_program() -> None:
    x = Tensor(np.random.default_rng(0).normal(size=(3, 4)))
    result = finite_diff_check(dc.sum, x)

    assert result.checked == 12
    assert result.skipped == ()
    assert result.max_error < 1e-9
    assert result.passed()


def test_softmax_kl_program() -> None:
    rng = np.random.default_rng(1)
    p = Tensor(rng.normal(size=(1, 4, 3, 3)))
    q = Tensor(rng.normal(size=(1, 4, 3, 3)))

    def program(inputs: Sequence[Tensor]) -> Tensor:
        a, b = inputs
        return kl_divergence(dc.channel_softmax(a), dc.channel_softmax(b))

    result = finite_diff_check(program, [p, q], 1e-4)
    assert result.checked == 72
    assert result.max_error <= 1e-3


def test_kink_is_skipped() -> None:
    x = Tensor([0.0, 1.0, -1.0])
    result = finite_diff_check(lambda t: dc.sum(dc.hinge(t)), x)

    assert result.skipped == ((0, 0),)
    assert result.checked == 2
    assert result.max_error < 1e-9


def test_inputs_restored() -> None:
    data = np.array([0.5, -0.25])
    x = Tensor(data)
    finite_diff_check(lambda t: dc.sum(dc.mul(t, t)), x)

    assert np.array_equal(x.data, data)
    assert x.requires_grad


def test_coordinate_budget() -> None:
    x = Tensor(np.random.default_rng(2).normal(size=100))
    result = finite_diff_check(dc.sum, x, coordinates=10, seed=4)

    assert result.checked == 10


def test_wrong_gradient_is_detected() -> None:
    class _Wrong(dc.tensor.Function):
        def forward(self, *arrays: np.ndarray) -> np.ndarray:
            return arrays[0] * 3

        def backward(self, grad: np.ndarray) -> list[np.ndarray | None]:
            return [grad * 2]

    x = Tensor([1.0, 2.0])
    result = finite_diff_check(lambda t: dc.sum(_Wrong()(t)), x)

    assert result.max_error == pytest.approx(1 / 3)
    assert not result.passed()


def test_bad_arguments() -> None:
    x = Tensor([1.0, 2.0])
    with pytest.raises(InvalidArgumentError):
        finite_diff_check(dc.sum, x, eps=0.0)
    with pytest.raises(InvalidArgumentError):
        finite_diff_check(lambda t: dc.mul(t, t), x)
