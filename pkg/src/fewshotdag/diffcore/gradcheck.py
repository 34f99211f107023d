"""Compare reverse-mode gradients against central finite differences."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from ..exceptions import InvalidArgumentError
from .tensor import Tape, Tensor

__all__ = [
    "GradCheckResult",
    "finite_diff_check",
]


@dataclass(frozen=True)
class GradCheckResult:
    """Outcome of a finite-difference gradient check."""

    max_error: float
    """Largest relative error over the checked coordinates."""

    checked: int
    """Number of coordinates compared."""

    skipped: tuple[tuple[int, int], ...]
    """``(input index, flat coordinate)`` pairs excluded near a kink."""

    def passed(self, tolerance: float = 1e-3) -> bool:
        """Return whether the maximum relative error is within tolerance."""
        return self.max_error <= tolerance


def _evaluate(
    f: Callable[..., Tensor], x: Tensor | Sequence[Tensor]
) -> tuple[float, list[bytes]]:
    with Tape() as tape:
        out = f(x)
    return out.item(), tape.kink_signatures()


def finite_diff_check(
    f: Callable[..., Tensor],
    x: Tensor | Sequence[Tensor],
    eps: float = 1e-4,
    *,
    floor: float = 1e-6,
    coordinates: int | None = None,
    seed: int = 0,
) -> GradCheckResult:
    """Check the reverse-mode gradient of a scalar program.

    Each coordinate is perturbed by ``±eps`` and the central difference
    ``(f(x + eps·e_i) − f(x − eps·e_i)) / (2·eps)`` is compared with the
    gradient from `~fewshotdag.diffcore.tensor.Tape.backward`. The relative
    error is ``|a − n| / max(|a|, |n|, floor)``.

    A coordinate is skipped, and reported, when the perturbation moves any
    piecewise operation to a different side of its kink. Points within
    `~fewshotdag.diffcore.tensor.KINK_TOLERANCE` of a kink count as on it,
    so a kink sitting exactly under the unperturbed point is always skipped
    for the coordinates that move it.

    Parameters
    ----------
    f
        Program mapping ``x`` (with the same structure as passed here) to a
        single-element tensor.
    x
        Input tensor or sequence of input tensors. They are marked as
        requiring gradients.
    eps
        Finite difference step.
    floor
        Lower bound on the denominator of the relative error.
    coordinates
        If given, check at most this many randomly chosen coordinates of each
        input.
    seed
        Seed for the coordinate choice.

    Returns
    -------
    GradCheckResult
        Maximum relative error and the skipped coordinates.

    Raises
    ------
    InvalidArgumentError
        Raised if ``eps`` is not positive or ``f`` is not scalar-valued.
    """
    if eps <= 0:
        raise InvalidArgumentError(f"eps must be positive, not {eps}")
    inputs = [x] if isinstance(x, Tensor) else list(x)
    originals = [t.data for t in inputs]
    for tensor in inputs:
        tensor.requires_grad = True
        tensor.data = tensor.data.copy()

    with Tape() as tape:
        out = f(x)
    if out.size != 1:
        raise InvalidArgumentError(f"f must be scalar, not shape {out.shape}")
    tape.backward(out)
    analytic = [
        t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
        for t in inputs
    ]
    baseline = tape.kink_signatures()

    rng = np.random.default_rng(seed)
    max_error = 0.0
    checked = 0
    skipped: list[tuple[int, int]] = []
    try:
        for index, tensor in enumerate(inputs):
            flat = tensor.data.reshape(-1)
            chosen = np.arange(flat.size)
            if coordinates is not None and coordinates < flat.size:
                chosen = np.sort(rng.choice(flat.size, coordinates, False))
            for coordinate in chosen:
                value = flat[coordinate]
                flat[coordinate] = value + eps
                plus, plus_kinks = _evaluate(f, x)
                flat[coordinate] = value - eps
                minus, minus_kinks = _evaluate(f, x)
                flat[coordinate] = value
                if plus_kinks != baseline or minus_kinks != baseline:
                    skipped.append((index, int(coordinate)))
                    continue
                numeric = (plus - minus) / (2 * eps)
                exact = float(analytic[index].reshape(-1)[coordinate])
                scale = max(abs(exact), abs(numeric), floor)
                max_error = max(max_error, abs(exact - numeric) / scale)
                checked += 1
    finally:
        for tensor, original in zip(inputs, originals, strict=True):
            tensor.data = original

    return GradCheckResult(
        max_error=max_error, checked=checked, skipped=tuple(skipped)
    )
