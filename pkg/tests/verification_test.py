"""Tests for the gradient-check suite."""

from __future__ import annotations

import pytest

from fewshotdag.exceptions import InvalidArgumentError
from fewshotdag.verification import available_checks, run_gradcheck_suite


def test_available_checks() -> None:
    names = available_checks()

    for name in ("conv2d", "bilinear_sample", "channel_softmax", "js_loss"):
        assert name in names
    assert len(names) == len(set(names))


def test_every_check_passes() -> None:
    results = run_gradcheck_suite(instances=5, seed=1)

    assert [r.name for r in results] == available_checks()
    for result in results:
        assert result.passed(), result
        assert result.instances == 5
        assert result.checked > 0


def test_losses_full_budget() -> None:
    names = ["global_loss", "local_loss", "supervised_total", "js_loss"]
    results = run_gradcheck_suite(names=names)

    assert [r.name for r in results] == names
    for result in results:
        assert result.instances == 50
        assert result.max_error <= 1e-3
        assert result.to_dict()["passed"] is True


def test_deterministic() -> None:
    first = run_gradcheck_suite(3, 4, names=["tanh", "softmax_kl"])
    second = run_gradcheck_suite(3, 4, names=["tanh", "softmax_kl"])

    assert first == second


def test_unknown_check() -> None:
    with pytest.raises(InvalidArgumentError):
        run_gradcheck_suite(names=["tanh", "nonexistent"])
