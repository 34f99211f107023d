"""Tests for the training objectives."""

from __future__ import annotations

import math

import numpy as np
import pytest

from fewshotdag import diffcore as dc
from fewshotdag.config import LossConfig
from fewshotdag.dag.forward import DagOutput
from fewshotdag.diffcore import Tape, Tensor
from fewshotdag.exceptions import InvalidArgumentError
from fewshotdag.losses import (
    global_loss,
    js_loss,
    kl_divergence,
    local_loss,
    pseudo_gt_from_teacher,
    supervised_total,
    unlabeled_total,
)
from fewshotdag.models.landmarks import LandmarkSet


def _output(
    v_global: Tensor, v_local: Tensor, fmap: Tensor | None = None
) -> DagOutput:
    if fmap is None:
        fmap = Tensor(np.zeros((1, 2, 1, 1)))
    return DagOutput(
        v_global=v_global,
        v_local_steps=(v_local,),
        fmap=fmap,
        affine=Tensor(np.zeros(6)),
    )


def test_global_loss() -> None:
    v = Tensor([[3.0, 4.0]])
    gt = Tensor([[0.0, 0.0]])

    assert global_loss(v, gt, 0.0).item() == 3.5
    assert global_loss(v, gt, 5.0).item() == 0.0
    assert global_loss(gt, gt, 0.1).item() == 0.0

    values = [global_loss(v, gt, m).item() for m in (0.0, 1.0, 3.0, 4.0)]
    assert values == sorted(values, reverse=True)


def test_local_loss() -> None:
    gt = Tensor(np.zeros((2, 2)))
    single = local_loss(Tensor([[3.0, 4.0]]), Tensor([[0.0, 0.0]]))
    assert single.item() == 3.5
    assert local_loss(Tensor([[1.0, 1.0], [3.0, 3.0]]), gt).item() == 2.0
    assert local_loss(gt, gt).item() == 0.0

    with pytest.raises(InvalidArgumentError):
        local_loss(Tensor(np.zeros((3, 2))), gt)


def test_global_equals_local_without_margin() -> None:
    rng = np.random.default_rng(5)
    for _ in range(10):
        v = Tensor(rng.normal(size=(4, 6, 2)))
        gt = Tensor(rng.normal(size=(4, 6, 2)))
        assert global_loss(v, gt, 0.0).item() == local_loss(v, gt).item()


def test_batched_losses() -> None:
    v = Tensor([[[3.0, 4.0]], [[0.0, 0.0]]])
    gt = Tensor(np.zeros((2, 1, 2)))

    assert local_loss(v, gt).item() == 1.75
    # The hinge applies per sample before the batch mean.
    assert global_loss(v, gt, 1.0).item() == 1.25


def test_landmark_sets_accepted() -> None:
    v = LandmarkSet([[0.5, 0.25]])
    gt = LandmarkSet([[0.0, 0.0]])

    assert local_loss(v, gt).item() == 0.375


def test_kl_divergence() -> None:
    p = Tensor([0.3, 0.7])
    assert kl_divergence(p, p).item() == 0.0

    value = kl_divergence(Tensor([1.0, 0.0]), Tensor([0.5, 0.5])).item()
    assert value == pytest.approx(math.log(2), abs=1e-6)

    value = kl_divergence(Tensor([0.5, 0.5]), Tensor([1.0, 0.0])).item()
    assert math.isfinite(value)
    expected = 0.5 * math.log(0.5) + 0.5 * math.log(0.5 / 1e-8)
    assert value == pytest.approx(expected, rel=1e-6)

    with pytest.raises(InvalidArgumentError):
        kl_divergence(Tensor([1.0]), Tensor([0.5, 0.5]))


def test_js_loss() -> None:
    big = 1000.0
    a_s = Tensor([[[[big]], [[0.0]]]])
    a_t = Tensor([[[[0.0]], [[big]]]])

    value = js_loss(a_s, a_t).item()
    assert value == pytest.approx(math.log(2) / 2, abs=1e-6)
    assert js_loss(a_t, a_s).item() == value
    assert js_loss(a_s, a_s).item() == 0.0

    with pytest.raises(InvalidArgumentError):
        js_loss(a_s, Tensor(np.zeros((1, 3, 1, 1))))


def test_js_loss_properties() -> None:
    rng = np.random.default_rng(6)
    for _ in range(10):
        a = Tensor(rng.normal(size=(2, 4, 3, 3)))
        b = Tensor(rng.normal(size=(2, 4, 3, 3)))
        assert js_loss(a, b).item() >= 0
        assert js_loss(a, b).item() == js_loss(b, a).item()
        shifted = Tensor(a.data + 3.0)
        assert js_loss(a, shifted).item() == pytest.approx(0.0, abs=1e-9)


def test_js_gradient_only_reaches_student() -> None:
    rng = np.random.default_rng(7)
    a_s = Tensor(rng.normal(size=(1, 3, 2, 2)), requires_grad=True)
    a_t = Tensor(rng.normal(size=(1, 3, 2, 2)), requires_grad=True)
    with Tape() as tape:
        loss = js_loss(a_s, a_t)
    tape.backward(loss)

    assert a_s.grad is not None
    assert np.any(a_s.grad != 0)
    assert a_t.grad is None or not np.any(a_t.grad)


def test_supervised_total() -> None:
    v_global = Tensor([[2.5, 2.5]])
    v_local = Tensor([[3.0, 4.0]])
    gt = Tensor([[0.0, 0.0]])
    config = LossConfig(m=0.0)

    assert supervised_total(v_global, v_local, gt, config).item() == 6.0
    assert supervised_total(gt, gt, gt, config).item() == 0.0

    no_local = config.copy(update={"w1": 0.0})
    value = supervised_total(v_global, v_local, gt, no_local).item()
    assert value == global_loss(v_global, gt, 0.0).item()


def test_supervise_all_steps() -> None:
    gt = Tensor([[0.0, 0.0]])
    first = Tensor([[1.0, 1.0]])
    last = Tensor([[3.0, 4.0]])
    config = LossConfig(m=0.0, supervise_all_steps=True)

    total = supervised_total(gt, last, gt, config, intermediate=[first])
    assert total.item() == 4.5

    plain = supervised_total(
        gt, last, gt, LossConfig(m=0.0), intermediate=[first]
    )
    assert plain.item() == 3.5


def test_unlabeled_total() -> None:
    config = LossConfig(m=0.0)
    teacher_fmap = Tensor([[[[0.0]], [[1000.0]]]])
    student_fmap = Tensor([[[[1000.0]], [[0.0]]]])
    teacher = _output(
        Tensor([[0.0, 0.0]]), Tensor([[0.0, 0.0]]), teacher_fmap
    )
    student = _output(
        Tensor([[2.5, 2.5]]), Tensor([[3.0, 4.0]]), student_fmap
    )

    value = unlabeled_total(student, teacher, config).item()
    assert value == pytest.approx(6.0 + math.log(2) / 2, abs=1e-6)

    without_js = config.copy(update={"w2": 0.0})
    assert unlabeled_total(student, teacher, without_js).item() == 6.0

    assert unlabeled_total(teacher, teacher, config).item() == 0.0


def test_teacher_receives_no_gradient() -> None:
    rng = np.random.default_rng(8)

    def tracked(shape: tuple[int, ...]) -> Tensor:
        return Tensor(rng.normal(size=shape), requires_grad=True)

    student = _output(tracked((4, 2)), tracked((4, 2)), tracked((1, 3, 2, 2)))
    teacher = _output(tracked((4, 2)), tracked((4, 2)), tracked((1, 3, 2, 2)))
    with Tape() as tape:
        # Touch the teacher tensors so they are leaves of this tape.
        anchor = dc.sum(dc.mul(teacher.v_local, 0.0))
        loss = dc.add(unlabeled_total(student, teacher, LossConfig()), anchor)
    tape.backward(loss)

    assert pseudo_gt_from_teacher(teacher).requires_grad is False
    for tensor in (teacher.v_global, teacher.fmap):
        assert tensor.grad is None
    assert teacher.v_local.grad is not None
    assert not np.any(teacher.v_local.grad)
    assert student.v_local.grad is not None
    assert np.any(student.v_local.grad)
