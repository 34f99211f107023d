"""Gradient-check suite over every primitive and composed loss."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from . import diffcore as dc
from .config import LossConfig
from .diffcore import Array, Tensor, finite_diff_check
from .exceptions import InvalidArgumentError
from .losses import (
    global_loss,
    js_loss,
    kl_divergence,
    local_loss,
    supervised_total,
)

__all__ = [
    "GRADCHECK_TOLERANCE",
    "SuiteResult",
    "available_checks",
    "run_gradcheck_suite",
]

GRADCHECK_TOLERANCE = 1e-3
"""Largest acceptable relative error."""

Program = Callable[[Sequence[Tensor]], Tensor]
Case = tuple[Program, list[Tensor]]
CaseBuilder = Callable[[np.random.Generator, int], Case]


@dataclass(frozen=True)
class SuiteResult:
    """Gradient-check outcome for one operation over many instances."""

    name: str
    """Operation or loss checked."""

    max_error: float
    """Largest relative error over all instances."""

    instances: int
    """Number of random instances."""

    checked: int
    """Total coordinates compared."""

    skipped: int
    """Total coordinates skipped next to a kink."""

    def passed(self, tolerance: float = GRADCHECK_TOLERANCE) -> bool:
        """Return whether the maximum error is within tolerance."""
        return self.max_error <= tolerance

    def to_dict(self) -> dict[str, float | int | bool | str]:
        """Convert to a dict for YAML output."""
        return {
            "max_error": self.max_error,
            "instances": self.instances,
            "checked": self.checked,
            "skipped": self.skipped,
            "passed": self.passed(),
        }


def _tensors(*arrays: Array) -> list[Tensor]:
    return [Tensor(a) for a in arrays]


def _projected(op: Callable[..., Tensor], weights: Array) -> Program:
    def program(inputs: Sequence[Tensor]) -> Tensor:
        return dc.sum(dc.mul(op(*inputs), weights))

    return program


def _binary(op: Callable[[Tensor, Tensor], Tensor]) -> CaseBuilder:
    def build(rng: np.random.Generator, instance: int) -> Case:
        a = rng.normal(size=(3, 4))
        b = rng.normal(size=(4,) if instance % 2 else (3, 4))
        return _projected(op, rng.normal(size=(3, 4))), _tensors(a, b)

    return build


def _unary(
    op: Callable[[Tensor], Tensor],
    low: float | None = None,
    high: float | None = None,
) -> CaseBuilder:
    def build(rng: np.random.Generator, instance: int) -> Case:
        if low is None or high is None:
            x = rng.normal(size=(3, 4))
        else:
            x = rng.uniform(low, high, size=(3, 4))
        return _projected(op, rng.normal(size=(3, 4))), _tensors(x)

    return build


def _matmul(rng: np.random.Generator, instance: int) -> Case:
    a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
    return _projected(dc.matmul, rng.normal(size=(3, 2))), _tensors(a, b)


def _conv2d(rng: np.random.Generator, instance: int) -> Case:
    stride = 1 + instance % 2
    size = 5 if stride == 1 else 3
    x = rng.normal(size=(1, 2, 5, 5))
    weight = rng.normal(size=(3, 2, 3, 3))
    bias = rng.normal(size=(3,))

    def op(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
        return dc.conv2d(x, weight, bias, stride=stride)

    projection = rng.normal(size=(1, 3, size, size))
    return _projected(op, projection), _tensors(x, weight, bias)


def _reduction(op: Callable[..., Tensor]) -> CaseBuilder:
    def build(rng: np.random.Generator, instance: int) -> Case:
        x = rng.normal(size=(3, 4))
        if instance % 2:

            def rows(t: Tensor) -> Tensor:
                return op(t, 1)

            return _projected(rows, rng.normal(size=3)), _tensors(x)

        def program(inputs: Sequence[Tensor]) -> Tensor:
            return op(inputs[0])

        return program, _tensors(x)

    return build


def _softmax(rng: np.random.Generator, instance: int) -> Case:
    x = rng.normal(size=(2, 3, 2, 2))
    projection = rng.normal(size=x.shape)
    return _projected(dc.channel_softmax, projection), _tensors(x)


def _bilinear(rng: np.random.Generator, instance: int) -> Case:
    fmap = rng.normal(size=(2, 4, 5))
    points = np.stack(
        [rng.uniform(-0.5, 4.5, size=3), rng.uniform(-0.5, 3.5, size=3)],
        axis=1,
    )
    projection = rng.normal(size=(3, 2))
    return _projected(dc.bilinear_sample, projection), _tensors(fmap, points)


def _concatenate(rng: np.random.Generator, instance: int) -> Case:
    a, b = rng.normal(size=(2, 3)), rng.normal(size=(2, 2))

    def op(a: Tensor, b: Tensor) -> Tensor:
        return dc.concatenate([a, b], axis=1)

    return _projected(op, rng.normal(size=(2, 5))), _tensors(a, b)


def _reshape(rng: np.random.Generator, instance: int) -> Case:
    x = rng.normal(size=(2, 6))

    def op(t: Tensor) -> Tensor:
        return dc.reshape(t, (3, 4))

    return _projected(op, rng.normal(size=(3, 4))), _tensors(x)


def _transpose(rng: np.random.Generator, instance: int) -> Case:
    x = rng.normal(size=(3, 4))
    return _projected(dc.transpose, rng.normal(size=(4, 3))), _tensors(x)


def _select(rng: np.random.Generator, instance: int) -> Case:
    x = rng.normal(size=(3, 4))
    index = instance % 3
    projection = rng.normal(size=4)

    def op(t: Tensor) -> Tensor:
        return dc.select(t, index)

    return _projected(op, projection), _tensors(x)


def _landmark_pair(rng: np.random.Generator) -> tuple[Array, Array]:
    return rng.uniform(0, 1, size=(4, 2)), rng.uniform(0, 1, size=(4, 2))


def _global(rng: np.random.Generator, instance: int) -> Case:
    v, gt = _landmark_pair(rng)
    m = rng.uniform(0, 0.2)

    def program(inputs: Sequence[Tensor]) -> Tensor:
        return global_loss(inputs[0], Tensor(gt), m)

    return program, _tensors(v)


def _local(rng: np.random.Generator, instance: int) -> Case:
    v, gt = _landmark_pair(rng)

    def program(inputs: Sequence[Tensor]) -> Tensor:
        return local_loss(inputs[0], Tensor(gt))

    return program, _tensors(v)


def _supervised(rng: np.random.Generator, instance: int) -> Case:
    v_global, gt = _landmark_pair(rng)
    v_local = rng.uniform(0, 1, size=(4, 2))
    config = LossConfig(m=float(rng.uniform(0, 0.2)), w1=0.5)

    def program(inputs: Sequence[Tensor]) -> Tensor:
        return supervised_total(inputs[0], inputs[1], Tensor(gt), config)

    return program, _tensors(v_global, v_local)


def _softmax_kl(rng: np.random.Generator, instance: int) -> Case:
    x = rng.normal(size=(2, 3, 2, 2))
    logits = rng.normal(size=x.shape)
    q = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)

    def program(inputs: Sequence[Tensor]) -> Tensor:
        return kl_divergence(dc.channel_softmax(inputs[0]), Tensor(q))

    return program, _tensors(x)


def _js(rng: np.random.Generator, instance: int) -> Case:
    a_student = rng.normal(size=(2, 3, 2, 2))
    a_teacher = rng.normal(size=(2, 3, 2, 2))

    def program(inputs: Sequence[Tensor]) -> Tensor:
        return js_loss(inputs[0], Tensor(a_teacher))

    return program, _tensors(a_student)


_CASES: dict[str, CaseBuilder] = {
    "add": _binary(dc.add),
    "sub": _binary(dc.sub),
    "mul": _binary(dc.mul),
    "matmul": _matmul,
    "conv2d": _conv2d,
    "relu": _unary(dc.relu),
    "tanh": _unary(dc.tanh),
    "abs": _unary(dc.abs),
    "log": _unary(dc.log, 0.5, 2.0),
    "mean": _reduction(dc.mean),
    "sum": _reduction(dc.sum),
    "hinge": _unary(dc.hinge),
    "channel_softmax": _softmax,
    "bilinear_sample": _bilinear,
    "concatenate": _concatenate,
    "reshape": _reshape,
    "transpose": _transpose,
    "select": _select,
    "global_loss": _global,
    "local_loss": _local,
    "supervised_total": _supervised,
    "softmax_kl": _softmax_kl,
    "js_loss": _js,
}


def run_gradcheck_suite(
    instances: int = 50,
    seed: int = 0,
    *,
    names: Sequence[str] | None = None,
    eps: float = 1e-4,
) -> list[SuiteResult]:
    """Check every primitive and loss on random double-precision inputs.

    Primitive outputs are reduced to a scalar by a random projection.
    Coordinates whose perturbation crosses a kink are skipped.

    Parameters
    ----------
    instances
        Random instances per operation.
    seed
        Seed of the random instances.
    names
        If given, only check these operations.
    eps
        Finite difference step.

    Returns
    -------
    list of SuiteResult
        One result per operation, in a fixed order.
    """
    order = list(_CASES)
    selected = order if names is None else list(names)
    unknown = [n for n in selected if n not in _CASES]
    if unknown:
        msg = f"Unknown gradient checks: {', '.join(unknown)}"
        raise InvalidArgumentError(msg)
    results = []
    for name in selected:
        build = _CASES[name]
        rng = np.random.default_rng([seed, order.index(name)])
        max_error = 0.0
        checked = 0
        skipped = 0
        for instance in range(instances):
            program, inputs = build(rng, instance)
            result = finite_diff_check(program, inputs, eps, seed=instance)
            max_error = max(max_error, result.max_error)
            checked += result.checked
            skipped += len(result.skipped)
        logging.info(f"Gradient check of {name}: max error {max_error:.3g}")
        results.append(
            SuiteResult(
                name=name,
                max_error=max_error,
                instances=instances,
                checked=checked,
                skipped=skipped,
            )
        )
    return results


def available_checks() -> list[str]:
    """Return the names accepted by `run_gradcheck_suite`."""
    return list(_CASES)
