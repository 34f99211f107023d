"""The DAG forward pass: global affine alignment then local refinement."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..diffcore import (
    Array,
    Tensor,
    add,
    as_tensor,
    matmul,
    mean,
    no_grad,
    reshape,
    select,
    stack,
)
from ..models.landmarks import GraphTopology, LandmarkSet, MeanShape
from .encoder import extract_features
from .graph import apply_affine, gcn_layer, vertex_inputs
from .params import DagModelParams

__all__ = [
    "DagOutput",
    "dag_forward",
    "image_batch",
    "predict_landmarks",
]

_IDENTITY_AFFINE = np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0])


@dataclass(frozen=True)
class DagOutput:
    """Everything one forward pass produces.

    Landmark tensors are ``K×2`` for a single image and ``B×K×2`` for a
    batch.
    """

    v_global: Tensor
    """Mean shape after the global affine transform."""

    v_local_steps: tuple[Tensor, ...]
    """Vertices after each local refinement stage."""

    fmap: Tensor
    """Encoder activations, ``C×H'×W'`` or ``B×C×H'×W'``."""

    affine: Tensor
    """Predicted affine values, ``6`` or ``B×6``."""

    @property
    def v_local(self) -> Tensor:
        """Vertices after the final refinement stage."""
        return self.v_local_steps[-1]

    def detach(self) -> DagOutput:
        """Return a copy with every gradient path cut."""
        return DagOutput(
            v_global=self.v_global.detach(),
            v_local_steps=tuple(v.detach() for v in self.v_local_steps),
            fmap=self.fmap.detach(),
            affine=self.affine.detach(),
        )


def _evolve(
    fmap: Tensor,
    params: DagModelParams,
    start: Tensor,
    topology: GraphTopology,
) -> tuple[Tensor, Tensor, list[Tensor]]:
    """Run the global and local stages for one image."""
    architecture = params.architecture
    h = vertex_inputs(fmap, start)
    for index in range(architecture.global_layers):
        h = gcn_layer(h, topology, params.gcn(f"global.{index}"))
    pooled = mean(h, axis=0, keepdims=True)
    residual = add(
        matmul(pooled, params["global.head.weight"]),
        params["global.head.bias"],
    )
    affine = add(reshape(residual, (6,)), as_tensor(_IDENTITY_AFFINE, start))
    vertices = apply_affine(start, affine)
    v_global = vertices

    steps = []
    for step in range(architecture.cascade_steps):
        h = vertex_inputs(fmap, vertices)
        for index in range(architecture.local_layers):
            h = gcn_layer(h, topology, params.gcn(f"local.{step}.{index}"))
        delta = gcn_layer(
            h, topology, params.gcn(f"local.{step}.head"), activation=None
        )
        vertices = add(vertices, delta)
        steps.append(vertices)
    return affine, v_global, steps


def dag_forward(
    image: Tensor,
    params: DagModelParams,
    mean_shape: MeanShape | LandmarkSet,
    topology: GraphTopology,
) -> DagOutput:
    """Localize landmarks by evolving the mean shape.

    Vertex features are sampled from the encoder output at the mean shape
    and fed, with the vertex coordinates, to the global graph network, whose
    pooled output is a residual added to the identity affine transform. The
    transformed shape is then refined by each local stage, which adds a
    per-vertex displacement.

    Parameters
    ----------
    image
        ``1×H×W`` image or ``B×1×H×W`` batch with intensities in ``[0, 1]``.
    params
        Model parameters.
    mean_shape
        Starting shape with K vertices.
    topology
        Landmark graph with K vertices.

    Returns
    -------
    DagOutput
        Global and local predictions plus the feature map.
    """
    fmap = extract_features(image, params)
    start = Tensor(mean_shape.coords, dtype=fmap.dtype)
    if image.ndim == 3:
        affine, v_global, steps = _evolve(fmap, params, start, topology)
        return DagOutput(v_global, tuple(steps), fmap, affine)

    results = [
        _evolve(select(fmap, b), params, start, topology)
        for b in range(fmap.shape[0])
    ]
    cascade = params.architecture.cascade_steps
    return DagOutput(
        v_global=stack([r[1] for r in results]),
        v_local_steps=tuple(
            stack([r[2][t] for r in results]) for t in range(cascade)
        ),
        fmap=fmap,
        affine=stack([r[0] for r in results]),
    )


def image_batch(
    images: Sequence[Array] | Array, params: DagModelParams
) -> Tensor:
    """Stack ``H×W`` images into a ``B×1×H×W`` model input."""
    array = np.stack([np.asarray(image) for image in images])
    dtype = params.architecture.numpy_dtype
    return Tensor(array[:, None, :, :], dtype=dtype)


def predict_landmarks(
    params: DagModelParams,
    images: Sequence[Array] | Array,
    mean_shape: MeanShape | LandmarkSet,
    topology: GraphTopology,
    *,
    batch_size: int = 16,
) -> list[LandmarkSet]:
    """Predict final landmarks without recording gradients.

    Parameters
    ----------
    params
        Model parameters.
    images
        ``H×W`` images.
    mean_shape
        Starting shape.
    topology
        Landmark graph.
    batch_size
        Images per forward pass.

    Returns
    -------
    list of LandmarkSet
        Final-stage landmarks, one per image.
    """
    predictions: list[LandmarkSet] = []
    with no_grad():
        for start in range(0, len(images), batch_size):
            chunk = images[start : start + batch_size]
            output = dag_forward(
                image_batch(chunk, params), params, mean_shape, topology
            )
            predictions.extend(LandmarkSet(v) for v in output.v_local.data)
    return predictions
