"""Adaptive moment estimation with decoupled weight decay."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from ..diffcore import Array, Tensor
from ..exceptions import InvalidArgumentError

__all__ = [
    "OptimizerState",
    "adam_step",
]


@dataclass
class OptimizerState:
    """Moment accumulators of every parameter."""

    first: list[Array] = field(default_factory=list)
    """First moment estimates, one per parameter."""

    second: list[Array] = field(default_factory=list)
    """Second moment estimates, one per parameter."""

    step: int = 0
    """Number of updates applied."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: Sequence[Tensor]) -> OptimizerState:
        """Create empty accumulators shaped like the parameters."""
        return cls(
            first=[np.zeros_like(p.data) for p in params],
            second=[np.zeros_like(p.data) for p in params],
        )

    def copy(self) -> OptimizerState:
        """Return an independent copy."""
        return replace(
            self,
            first=[a.copy() for a in self.first],
            second=[a.copy() for a in self.second],
        )


def adam_step(
    params: Sequence[Tensor],
    grads: Sequence[Array],
    state: OptimizerState,
    lr: float,
    weight_decay: float,
) -> None:
    """Update parameters in place.

    Applies the bias-corrected adaptive moment step and, separately, the
    decay ``lr·weight_decay·θ`` computed from the parameter values before
    the step.

    Parameters
    ----------
    params
        Parameters to update.
    grads
        Gradient of each parameter.
    state
        Accumulators, updated in place.
    lr
        Learning rate.
    weight_decay
        Decoupled weight decay factor.

    Raises
    ------
    InvalidArgumentError
        Raised if the gradients or accumulators do not match the parameters.
    """
    if not (len(params) == len(grads) == len(state.first)):
        msg = (
            f"Got {len(params)} parameters, {len(grads)} gradients and"
            f" {len(state.first)} accumulators"
        )
        raise InvalidArgumentError(msg)
    for index, (param, grad) in enumerate(zip(params, grads, strict=True)):
        shapes = {grad.shape, state.first[index].shape}
        if shapes != {param.shape}:
            msg = f"Gradient {index} has shape {grad.shape}, not {param.shape}"
            raise InvalidArgumentError(msg)

    state.step += 1
    correction1 = 1 - state.beta1**state.step
    correction2 = 1 - state.beta2**state.step
    for index, (param, grad) in enumerate(zip(params, grads, strict=True)):
        first = state.beta1 * state.first[index] + (1 - state.beta1) * grad
        second = state.beta2 * state.second[index] + (
            1 - state.beta2
        ) * (grad * grad)
        state.first[index] = first
        state.second[index] = second
        step = lr * (first / correction1) / (
            np.sqrt(second / correction2) + state.eps
        )
        decay = lr * weight_decay * param.data
        param.data = (param.data - step - decay).astype(
            param.dtype, copy=False
        )
