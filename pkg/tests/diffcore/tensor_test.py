"""Tests for tensors and reverse accumulation."""

from __future__ import annotations

import numpy as np
import pytest

from fewshotdag import diffcore as dc
from fewshotdag.diffcore import Tape, Tensor, backward, no_grad
from fewshotdag.exceptions import InvalidArgumentError


def test_sum_gradient_is_ones() -> None:
    x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    with Tape():
        loss = dc.sum(x)
    backward(loss)

    assert x.grad is not None
    assert np.array_equal(x.grad, np.ones((2, 3)))


def test_mean_of_squares() -> None:
    data = np.array([1.0, -2.0, 3.0, 0.5])
    x = Tensor(data, requires_grad=True)
    with Tape():
        loss = dc.mean(dc.mul(x, x))
    backward(loss)

    assert loss.item() == pytest.approx(np.mean(data**2))
    assert x.grad is not None
    assert np.allclose(x.grad, 2 * data / data.size, rtol=0, atol=1e-15)


def test_unused_leaf_gets_zero_gradient() -> None:
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = Tensor([3.0, 4.0], requires_grad=True)
    with Tape() as tape:
        dc.sum(y)
        loss = dc.sum(dc.mul(x, x))
    tape.backward(loss)

    assert y.grad is not None
    assert np.array_equal(y.grad, np.zeros(2))
    assert x.grad is not None
    assert np.array_equal(x.grad, [2.0, 4.0])


def test_shared_input_accumulates() -> None:
    x = Tensor([2.0], requires_grad=True)
    with Tape():
        loss = dc.sum(dc.add(dc.mul(x, x), x))
    backward(loss)

    assert x.grad is not None
    assert x.grad[0] == 5.0


def test_repeated_backward_resets_gradients() -> None:
    x = Tensor([1.0, 2.0], requires_grad=True)
    with Tape() as tape:
        loss = dc.sum(dc.mul(x, x))
    tape.backward(loss)
    first = x.grad.copy() if x.grad is not None else None
    tape.backward(loss)

    assert first is not None
    assert x.grad is not None
    assert np.array_equal(first, x.grad)


def test_non_scalar_loss() -> None:
    x = Tensor([1.0, 2.0], requires_grad=True)
    with Tape():
        out = dc.mul(x, x)
    with pytest.raises(InvalidArgumentError):
        backward(out)


def test_loss_without_tape() -> None:
    x = Tensor([1.0, 2.0], requires_grad=True)
    loss = dc.sum(x)

    assert not loss.requires_grad
    with pytest.raises(InvalidArgumentError):
        backward(loss)


def test_no_grad() -> None:
    x = Tensor([1.0, 2.0], requires_grad=True)
    with Tape() as tape:
        with no_grad():
            constant = dc.mul(x, x)
        loss = dc.sum(dc.mul(constant, x))
    tape.backward(loss)

    assert not constant.requires_grad
    assert x.grad is not None
    assert np.array_equal(x.grad, [1.0, 4.0])


def test_backward_is_deterministic() -> None:
    rng = np.random.default_rng(3)
    data = rng.normal(size=(2, 3, 5, 5))
    kernel = rng.normal(size=(4, 3, 3, 3))

    grads = []
    for _ in range(2):
        x = Tensor(data, requires_grad=True)
        weight = Tensor(kernel, requires_grad=True)
        bias = Tensor(np.zeros(4), requires_grad=True)
        with Tape():
            out = dc.conv2d(x, weight, bias, stride=2)
            loss = dc.mean(dc.tanh(out))
        backward(loss)
        assert weight.grad is not None
        grads.append(weight.grad.tobytes())

    assert grads[0] == grads[1]


def test_tensor_basics() -> None:
    t = Tensor([[1, 2], [3, 4]])
    assert t.dtype == np.float64
    assert t.shape == (2, 2)
    assert t.ndim == 2
    assert t.size == 4
    assert not t.requires_grad

    single = Tensor(np.float32(1.5), dtype=np.float32)
    assert single.dtype == np.float32
    assert single.item() == 1.5
    with pytest.raises(InvalidArgumentError):
        t.item()

    copy = t.numpy()
    copy[0, 0] = 9.0
    assert t.data[0, 0] == 1.0
    assert not t.detach().requires_grad
