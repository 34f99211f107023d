"""Learnable parameters of the DAG model."""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from dataclasses import dataclass

import numpy as np

from ..config import ArchitectureConfig
from ..diffcore import Tensor
from ..exceptions import InvalidArgumentError

__all__ = [
    "DagModelParams",
    "GcnWeights",
    "expected_shapes",
]

AFFINE_SIZE = 6
"""Number of residual affine values emitted by the global head."""


@dataclass(frozen=True)
class GcnWeights:
    """Weights of one graph convolution layer."""

    self_weight: Tensor
    """``F_in×F_out`` transform of each vertex's own features."""

    neigh_weight: Tensor
    """``F_in×F_out`` transform of the neighbor mean."""

    bias: Tensor
    """Bias of length ``F_out``."""


def _gcn_shapes(
    prefix: str, fan_in: int, fan_out: int
) -> dict[str, tuple[int, ...]]:
    return {
        f"{prefix}.self": (fan_in, fan_out),
        f"{prefix}.neigh": (fan_in, fan_out),
        f"{prefix}.bias": (fan_out,),
    }


def expected_shapes(
    architecture: ArchitectureConfig,
) -> dict[str, tuple[int, ...]]:
    """Return the name and shape of every parameter tensor, in order.

    Parameters
    ----------
    architecture
        Architecture descriptor.

    Returns
    -------
    dict of tuple of int
        Shapes keyed by parameter name. Encoder blocks are ``encoder.<i>``,
        global layers ``global.<i>`` and ``global.head``, local stages
        ``local.<t>.<i>`` and ``local.<t>.head``.
    """
    shapes: dict[str, tuple[int, ...]] = {}
    in_channels = 1
    for index, channels in enumerate(architecture.encoder_channels):
        shapes[f"encoder.{index}.weight"] = (channels, in_channels, 3, 3)
        shapes[f"encoder.{index}.bias"] = (channels,)
        in_channels = channels

    vertex_features = architecture.feature_channels + 2
    width = architecture.gcn_width
    fan_in = vertex_features
    for index in range(architecture.global_layers):
        shapes.update(_gcn_shapes(f"global.{index}", fan_in, width))
        fan_in = width
    shapes["global.head.weight"] = (width, AFFINE_SIZE)
    shapes["global.head.bias"] = (AFFINE_SIZE,)

    for step in range(architecture.cascade_steps):
        fan_in = vertex_features
        for index in range(architecture.local_layers):
            shapes.update(_gcn_shapes(f"local.{step}.{index}", fan_in, width))
            fan_in = width
        shapes.update(_gcn_shapes(f"local.{step}.head", width, 2))
    return shapes


class DagModelParams:
    """All learnable weights of one DAG model.

    Parameters
    ----------
    architecture
        Descriptor the tensors must match.
    tensors
        Parameter tensors keyed by name, see `expected_shapes`.

    Raises
    ------
    InvalidArgumentError
        Raised if a tensor is missing, unexpected or has the wrong shape.
    """

    def __init__(
        self, architecture: ArchitectureConfig, tensors: Mapping[str, Tensor]
    ) -> None:
        shapes = expected_shapes(architecture)
        unknown = set(tensors) - set(shapes)
        if unknown:
            names = ", ".join(sorted(unknown))
            raise InvalidArgumentError(f"Unexpected parameters: {names}")
        for name, shape in shapes.items():
            if name not in tensors:
                raise InvalidArgumentError(f"Missing parameter {name}")
            if tensors[name].shape != shape:
                msg = (
                    f"Parameter {name} has shape {tensors[name].shape},"
                    f" expected {shape}"
                )
                raise InvalidArgumentError(msg)
        self.architecture = architecture
        self._tensors = {name: tensors[name] for name in shapes}

    @classmethod
    def initialize(
        cls, architecture: ArchitectureConfig, seed: int
    ) -> DagModelParams:
        """Create freshly initialized parameters.

        Convolutions use He-normal weights, graph layers Glorot-uniform
        weights and all biases start at zero. The global and local heads
        start at exactly zero, so an untrained model returns the mean shape.

        Parameters
        ----------
        architecture
            Architecture descriptor.
        seed
            Seed of the weight initialization.

        Returns
        -------
        DagModelParams
            New parameters.
        """
        rng = np.random.default_rng(seed)
        dtype = architecture.numpy_dtype
        tensors = {}
        for name, shape in expected_shapes(architecture).items():
            if ".head." in name or name.endswith("bias"):
                data = np.zeros(shape)
            elif name.startswith("encoder."):
                fan_in = shape[1] * shape[2] * shape[3]
                data = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
            else:
                limit = np.sqrt(6.0 / (shape[0] + shape[1]))
                data = rng.uniform(-limit, limit, size=shape)
            tensors[name] = Tensor(data, requires_grad=True, dtype=dtype)
        return cls(architecture, tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def copy(self) -> DagModelParams:
        """Return an independent copy of the parameters."""
        tensors = {
            name: Tensor(t.data.copy(), requires_grad=True)
            for name, t in self._tensors.items()
        }
        return DagModelParams(self.architecture, tensors)

    def parameters(self) -> list[Tensor]:
        """Return the parameter tensors in canonical order."""
        return list(self._tensors.values())

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        """Return ``(name, tensor)`` pairs in canonical order."""
        return list(self._tensors.items())

    def assign(self, other: DagModelParams) -> None:
        """Overwrite every value with those of another parameter set.

        Raises
        ------
        InvalidArgumentError
            Raised if the architectures differ.
        """
        if other.architecture != self.architecture:
            raise InvalidArgumentError("Cannot assign across architectures")
        for name, tensor in self._tensors.items():
            tensor.data = other[name].data.copy()

    def equals(self, other: DagModelParams) -> bool:
        """Return whether both sets hold bit-identical values."""
        return self.architecture == other.architecture and all(
            np.array_equal(t.data, other[name].data)
            for name, t in self._tensors.items()
        )

    def conv_block(self, index: int) -> tuple[Tensor, Tensor]:
        """Return weight and bias of one encoder block."""
        return (
            self._tensors[f"encoder.{index}.weight"],
            self._tensors[f"encoder.{index}.bias"],
        )

    def gcn(self, prefix: str) -> GcnWeights:
        """Return the weights of the graph layer with a given prefix."""
        return GcnWeights(
            self_weight=self._tensors[f"{prefix}.self"],
            neigh_weight=self._tensors[f"{prefix}.neigh"],
            bias=self._tensors[f"{prefix}.bias"],
        )
