"""Tests for graph operations on landmark vertices."""

from __future__ import annotations

import numpy as np
import pytest

from fewshotdag.dag.graph import (
    apply_affine,
    compute_mean_shape,
    gcn_layer,
    sample_vertex_features,
)
from fewshotdag.dag.params import GcnWeights
from fewshotdag.diffcore import Tensor, finite_diff_check
from fewshotdag.diffcore import sum as dc_sum
from fewshotdag.exceptions import InvalidArgumentError
from fewshotdag.models.landmarks import (
    AffineParams,
    GraphTopology,
    LandmarkSet,
)


def _weights(
    self_weight: np.ndarray, neigh_weight: np.ndarray, bias: np.ndarray
) -> GcnWeights:
    return GcnWeights(Tensor(self_weight), Tensor(neigh_weight), Tensor(bias))


def test_compute_mean_shape() -> None:
    single = LandmarkSet([[0.1, 0.2], [0.3, 0.4]])
    assert np.array_equal(compute_mean_shape([single]).coords, single.coords)

    mean = compute_mean_shape([LandmarkSet([[0, 0]]), LandmarkSet([[1, 1]])])
    assert np.array_equal(mean.coords, [[0.5, 0.5]])

    rng = np.random.default_rng(0)
    sets = [LandmarkSet(rng.uniform(size=(5, 2))) for _ in range(7)]
    forward = compute_mean_shape(sets).coords
    backward = compute_mean_shape(sets[::-1]).coords
    shuffled = compute_mean_shape([sets[i] for i in rng.permutation(7)])
    assert np.array_equal(forward, backward)
    assert np.array_equal(forward, shuffled.coords)

    with pytest.raises(InvalidArgumentError):
        compute_mean_shape([])
    with pytest.raises(InvalidArgumentError):
        compute_mean_shape([single, LandmarkSet([[0, 0]])])


def test_sample_vertex_features() -> None:
    fmap = Tensor(np.arange(2 * 3 * 4, dtype=np.float64).reshape(2, 3, 4))

    corner = sample_vertex_features(fmap, Tensor([[0.0, 0.0]]))
    assert np.array_equal(corner.data, [fmap.data[:, 0, 0]])

    far = sample_vertex_features(fmap, Tensor([[1.0, 1.0]]))
    outside = sample_vertex_features(fmap, Tensor([[2.0, 2.0]]))
    assert np.array_equal(far.data, [fmap.data[:, 2, 3]])
    assert np.array_equal(outside.data, far.data)


def test_sample_vertex_features_gradient() -> None:
    rng = np.random.default_rng(1)
    fmap = Tensor(rng.normal(size=(3, 5, 5)))
    vertices = Tensor(rng.uniform(0.05, 0.95, size=(4, 2)))

    def program(inputs: list[Tensor]) -> Tensor:
        return dc_sum(sample_vertex_features(inputs[0], inputs[1]))

    result = finite_diff_check(program, [fmap, vertices])
    assert result.max_error <= 1e-3
    assert result.checked > 0


def test_gcn_layer() -> None:
    topology = GraphTopology.from_edges(2, [(0, 1)])
    h = Tensor([[1.0], [3.0]])

    weights = _weights(np.ones((1, 1)), np.ones((1, 1)), np.zeros(1))
    out = gcn_layer(h, topology, weights, activation=None)
    assert np.array_equal(out.data, [[4.0], [4.0]])

    zero = _weights(np.zeros((1, 3)), np.zeros((1, 3)), np.zeros(3))
    assert np.array_equal(gcn_layer(h, topology, zero).data, np.zeros((2, 3)))

    negative = _weights(-np.ones((1, 1)), np.zeros((1, 1)), np.zeros(1))
    assert np.array_equal(
        gcn_layer(h, topology, negative).data, np.zeros((2, 1))
    )

    with pytest.raises(InvalidArgumentError):
        gcn_layer(Tensor(np.ones((3, 1))), topology, weights)


def test_gcn_layer_is_equivariant() -> None:
    rng = np.random.default_rng(2)
    topology = GraphTopology.ring(6)
    h = rng.normal(size=(6, 3))
    weights = _weights(
        rng.normal(size=(3, 4)), rng.normal(size=(3, 4)), rng.normal(size=4)
    )
    out = gcn_layer(Tensor(h), topology, weights).data

    # Rotating and reflecting the ring are automorphisms.
    for perm in (np.roll(np.arange(6), 2), np.arange(6)[::-1]):
        permuted = gcn_layer(Tensor(h[perm]), topology, weights).data
        assert np.allclose(permuted, out[perm], rtol=0, atol=1e-12)


def test_apply_affine() -> None:
    shape = LandmarkSet([[0.25, 0.5], [1.0, 0.0]])

    identity = apply_affine(shape, AffineParams.identity())
    assert np.array_equal(identity.data, shape.coords)

    moved = apply_affine(shape, AffineParams(tx=0.1, ty=0.2))
    assert np.allclose(moved.data, shape.coords + [0.1, 0.2], atol=1e-15)

    rotation = AffineParams.from_array([0, -1, 1, 0, 0, 0])
    rotated = apply_affine(LandmarkSet([[1.0, 0.0]]), rotation)
    assert np.array_equal(rotated.data, [[0.0, 1.0]])

    general = apply_affine(shape, Tensor([2.0, 3.0, 4.0, 5.0, 6.0, 7.0]))
    x, y = shape.coords[:, 0], shape.coords[:, 1]
    expected = np.stack([2 * x + 3 * y + 6, 4 * x + 5 * y + 7], axis=1)
    assert np.allclose(general.data, expected, atol=1e-15)

    with pytest.raises(InvalidArgumentError):
        apply_affine(shape, Tensor(np.ones(4)))
    with pytest.raises(InvalidArgumentError):
        AffineParams.from_array([1.0, 0.0, 0.0, 1.0, np.nan, 0.0])


def test_apply_affine_gradient() -> None:
    rng = np.random.default_rng(3)
    shape = Tensor(rng.uniform(size=(4, 2)))
    affine = Tensor(rng.normal(size=6))

    def program(inputs: list[Tensor]) -> Tensor:
        return dc_sum(apply_affine(inputs[0], inputs[1]))

    assert finite_diff_check(program, [shape, affine]).max_error <= 1e-3


def test_topology() -> None:
    topology = GraphTopology.from_edges(3, [(1, 0), (0, 1), (2, 1)])
    assert topology.edges == ((0, 1), (1, 2))
    assert topology.neighbors == ((1,), (0, 2), (1,))
    assert np.array_equal(topology.adjacency(), topology.adjacency().T)
    assert np.array_equal(topology.inverse_degrees(), [1.0, 0.5, 1.0])

    assert len(GraphTopology.ring(5).edges) == 5
    assert len(GraphTopology.complete(5).edges) == 10
    assert GraphTopology.from_edges(1, []).neighbors == ((),)

    with pytest.raises(InvalidArgumentError):
        GraphTopology.from_edges(3, [(0, 0), (1, 2)])
    with pytest.raises(InvalidArgumentError):
        GraphTopology.from_edges(3, [(0, 1)])
    with pytest.raises(InvalidArgumentError):
        GraphTopology.from_edges(2, [(0, 2)])
