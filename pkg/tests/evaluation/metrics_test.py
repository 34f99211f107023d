"""Tests for landmark error metrics."""

from __future__ import annotations

import numpy as np
import pytest

from fewshotdag.config import EvaluationConfig
from fewshotdag.dag.graph import compute_mean_shape
from fewshotdag.dag.params import DagModelParams
from fewshotdag.evaluation.metrics import (
    aggregate_by_method,
    euclidean_errors,
    evaluate_model,
    method_order,
    summarize,
)
from fewshotdag.exceptions import InvalidArgumentError
from fewshotdag.models.landmarks import LandmarkSet
from fewshotdag.models.metrics import MetricSummary, ReportRow
from fewshotdag.models.samples import Split

from ..support.builders import random_samples, ring, tiny_architecture


def test_euclidean_errors() -> None:
    gt = LandmarkSet([[0.5, 0.5], [0.1, 0.2]])
    assert not np.any(euclidean_errors(gt, gt, 64))

    pred = LandmarkSet([[0.5 + 3 / 100, 0.5 + 4 / 100], [0.1, 0.2]])
    errors = euclidean_errors(pred, gt, 100)
    assert errors == pytest.approx([5.0, 0.0], abs=1e-12)

    wide = euclidean_errors([[0.01, 0.02]], [[0.0, 0.0]], 300, 200)
    assert wide == pytest.approx([5.0], abs=1e-12)

    batch = euclidean_errors(np.zeros((3, 2, 2)), np.zeros((3, 2, 2)), 10)
    assert batch.shape == (3, 2)

    with pytest.raises(InvalidArgumentError):
        euclidean_errors(np.zeros((3, 2)), np.zeros((2, 2)), 10)
    with pytest.raises(InvalidArgumentError):
        euclidean_errors(gt, gt, 0)


def test_summarize() -> None:
    summary = summarize([[0.0, 10.0]], 512)
    assert summary.mean == 5.0
    assert summary.std == 5.0
    assert summary.threshold == 25.6
    assert summary.failure_rate == 0.0
    assert summary.sample_count == 1

    sample = summarize([[0.0, 10.0]], 512, ddof=1)
    assert sample.std == pytest.approx(np.sqrt(50.0))

    failing = summarize([[30.0, 1.0], [1.0, 1.0]], 512)
    assert failing.failure_rate == 0.5
    assert failing.landmark_failure_rate == 0.25

    zero = summarize(np.zeros((4, 3)), 64)
    assert zero.failure_rate == 0.0
    assert zero.mean == 0.0

    with pytest.raises(InvalidArgumentError):
        summarize(np.zeros((0, 3)), 64)


def test_failure_rate_monotone_in_threshold() -> None:
    errors = np.random.default_rng(0).exponential(3.0, size=(50, 8))
    rates = [
        summarize(errors, 64, failure_fraction=f).failure_rate
        for f in np.linspace(0.01, 0.5, 25)
    ]
    assert rates == sorted(rates, reverse=True)
    assert all(0.0 <= r <= 1.0 for r in rates)


def test_evaluate_model() -> None:
    labeled = random_samples(3)
    mean_shape = compute_mean_shape([s.landmarks for s in labeled])
    params = DagModelParams.initialize(tiny_architecture(), seed=0)
    test = random_samples(4, seed=5, split=Split.test)

    summary = evaluate_model(params, test, mean_shape, ring())
    expected = np.stack(
        [
            euclidean_errors(mean_shape, s.landmarks, 16)
            for s in test
            if s.landmarks is not None
        ]
    )
    assert summary.errors.shape == (4, 4)
    assert np.allclose(summary.errors, expected, rtol=0, atol=1e-12)
    assert summary.threshold == 0.8

    strict = evaluate_model(
        params,
        test,
        mean_shape,
        ring(),
        EvaluationConfig(failure_fraction=0.01),
    )
    assert strict.failure_rate >= summary.failure_rate

    with pytest.raises(InvalidArgumentError):
        evaluate_model(params, [], mean_shape, ring())
    unlabeled = random_samples(1, split=Split.unlabeled)
    with pytest.raises(InvalidArgumentError):
        evaluate_model(params, unlabeled, mean_shape, ring())


def _row(method: str, seed: int, mean: float) -> ReportRow:
    summary = MetricSummary(
        errors=np.full((1, 1), mean),
        mean=mean,
        std=0.0,
        failure_rate=0.0,
        landmark_failure_rate=0.0,
        threshold=3.2,
    )
    return ReportRow(method, seed, summary)


def test_aggregate_by_method() -> None:
    rows = [
        _row("mean_teacher_js", 0, 3.0),
        _row("supervised_only", 0, 5.0),
        _row("supervised_only", 1, 7.0),
        _row("supervised_only", 2, 6.0),
        _row("custom", 0, 1.0),
    ]
    medians = aggregate_by_method(rows)

    assert medians == {
        "supervised_only": 6.0,
        "mean_teacher_js": 3.0,
        "custom": 1.0,
    }
    assert list(medians) == ["supervised_only", "mean_teacher_js", "custom"]


def test_method_order() -> None:
    assert method_order("supervised_only") < method_order("pseudo_label")
    assert method_order("mean_teacher") < method_order("mean_teacher_js")
    assert method_order("mean_teacher_js") < method_order("pretrain")
