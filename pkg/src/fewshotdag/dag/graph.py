"""Graph operations on landmark vertices."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence

import numpy as np

from ..diffcore import (
    Tensor,
    add,
    as_tensor,
    bilinear_sample,
    concatenate,
    matmul,
    mul,
    relu,
    reshape,
)
from ..exceptions import InvalidArgumentError
from ..models.landmarks import (
    AffineParams,
    GraphTopology,
    LandmarkSet,
    MeanShape,
)
from .params import GcnWeights

__all__ = [
    "apply_affine",
    "compute_mean_shape",
    "gcn_layer",
    "sample_vertex_features",
    "vertex_inputs",
]

# Reorders (a11, a12, a21, a22, tx, ty) into the rows of the 3×2 matrix P
# with [x, y, 1] @ P = [x', y'].
_AFFINE_ORDER = np.eye(6)[:, [0, 2, 1, 3, 4, 5]]


def compute_mean_shape(landmark_sets: Sequence[LandmarkSet]) -> MeanShape:
    """Average landmark sets vertex by vertex.

    Sums are exactly rounded, so the result does not depend on the order of
    the input.

    Raises
    ------
    InvalidArgumentError
        Raised if the list is empty or the sets disagree on K.
    """
    if not landmark_sets:
        raise InvalidArgumentError("Mean shape needs at least one set")
    counts = {s.num_landmarks for s in landmark_sets}
    if len(counts) != 1:
        raise InvalidArgumentError(f"Landmark sets mix K values {counts}")
    stacked = np.stack([s.coords for s in landmark_sets])
    n = len(landmark_sets)
    mean = np.empty(stacked.shape[1:])
    for index in np.ndindex(*mean.shape):
        mean[index] = math.fsum(stacked[(slice(None), *index)]) / n
    return MeanShape(mean)


def sample_vertex_features(fmap: Tensor, vertices: Tensor) -> Tensor:
    """Sample a feature map at normalized vertex positions.

    Vertex ``(x, y)`` is read at feature pixel ``(x·(W'−1), y·(H'−1))``, so
    vertices outside ``[0, 1]²`` see the nearest border value.

    Parameters
    ----------
    fmap
        Feature map of shape ``C×H'×W'``.
    vertices
        ``K×2`` normalized coordinates.

    Returns
    -------
    Tensor
        ``K×C`` features.
    """
    _, height, width = fmap.shape
    scale = np.array([[width - 1, height - 1]], dtype=vertices.dtype)
    return bilinear_sample(fmap, mul(vertices, scale))


def vertex_inputs(fmap: Tensor, vertices: Tensor) -> Tensor:
    """Return sampled features concatenated with vertex coordinates."""
    return concatenate(
        [sample_vertex_features(fmap, vertices), vertices], axis=1
    )


def gcn_layer(
    features: Tensor,
    topology: GraphTopology,
    weights: GcnWeights,
    activation: Callable[[Tensor], Tensor] | None = relu,
) -> Tensor:
    """Apply one graph convolution.

    Computes ``act(h W_self + mean_neigh(h) W_neigh + b)`` where
    ``mean_neigh`` averages the rows of each vertex's neighbors.

    Parameters
    ----------
    features
        ``K×F_in`` vertex features.
    topology
        Landmark graph with K vertices.
    weights
        Layer weights.
    activation
        Activation, or `None` for the identity used by output layers.

    Returns
    -------
    Tensor
        ``K×F_out`` features.

    Raises
    ------
    InvalidArgumentError
        Raised if K or the feature width disagree with the weights.
    """
    if features.ndim != 2 or features.shape[0] != topology.num_vertices:
        msg = (
            f"Features of shape {features.shape} do not match a graph with"
            f" {topology.num_vertices} vertices"
        )
        raise InvalidArgumentError(msg)
    dtype = features.dtype
    adjacency = Tensor(topology.adjacency(), dtype=dtype)
    inverse_degree = topology.inverse_degrees()[:, None].astype(dtype)
    neighbor_mean = mul(matmul(adjacency, features), inverse_degree)
    out = add(
        add(
            matmul(features, weights.self_weight),
            matmul(neighbor_mean, weights.neigh_weight),
        ),
        weights.bias,
    )
    return activation(out) if activation is not None else out


def apply_affine(
    shape: Tensor | LandmarkSet, affine: Tensor | AffineParams
) -> Tensor:
    """Transform every vertex by an affine map.

    Parameters
    ----------
    shape
        ``K×2`` vertices.
    affine
        Six values ``(a11, a12, a21, a22, tx, ty)``.

    Returns
    -------
    Tensor
        ``K×2`` vertices ``(a11·x + a12·y + tx, a21·x + a22·y + ty)``.
    """
    if isinstance(shape, LandmarkSet):
        shape = Tensor(shape.coords)
    if isinstance(affine, AffineParams):
        affine = Tensor(affine.to_array(), dtype=shape.dtype)
    if affine.size != 6:
        msg = f"Affine needs 6 values, not {affine.shape}"
        raise InvalidArgumentError(msg)
    order = as_tensor(_AFFINE_ORDER, shape)
    matrix = reshape(matmul(reshape(affine, (1, 6)), order), (3, 2))
    ones = np.ones((shape.shape[0], 1), dtype=shape.dtype)
    return matmul(concatenate([shape, as_tensor(ones)], axis=1), matrix)
