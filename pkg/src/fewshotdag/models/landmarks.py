"""Representations of landmark configurations and their graph."""

from __future__ import annotations

from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from ..diffcore import Array
from ..exceptions import InvalidArgumentError

__all__ = [
    "AffineParams",
    "GraphTopology",
    "LandmarkSet",
    "MeanShape",
]


@dataclass(frozen=True, eq=False, init=False)
class LandmarkSet:
    """K ordered vertices in normalized image coordinates.

    ``(0, 0)`` is the top-left corner of the image and ``(1, 1)`` the
    bottom-right corner. Vertex ``i`` always denotes the same anatomical
    point within one dataset.
    """

    coords: Array
    """Array of shape ``K×2`` holding ``(x, y)`` pairs."""

    def __init__(self, coords: ArrayLike) -> None:
        array = np.array(coords, dtype=np.float64)
        if array.ndim != 2 or array.shape[1] != 2 or array.shape[0] < 1:
            msg = f"Landmarks must have shape K×2, not {array.shape}"
            raise InvalidArgumentError(msg)
        array.flags.writeable = False
        object.__setattr__(self, "coords", array)

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def num_landmarks(self) -> int:
        """Number of vertices K."""
        return self.coords.shape[0]

    def bounding_box(self) -> tuple[float, float]:
        """Return the width and height of the landmarks' bounding box."""
        extent = self.coords.max(axis=0) - self.coords.min(axis=0)
        return float(extent[0]), float(extent[1])

    def to_list(self) -> list[list[float]]:
        """Convert to nested lists for JSON serialization."""
        return self.coords.tolist()


class MeanShape(LandmarkSet):
    """Per-vertex mean of the labeled training landmark sets."""


@dataclass(frozen=True)
class AffineParams:
    """Six values of a 2×3 affine transform of normalized coordinates.

    A vertex ``(x, y)`` maps to ``(a11·x + a12·y + tx, a21·x + a22·y + ty)``.
    """

    a11: float = 1.0
    a12: float = 0.0
    a21: float = 0.0
    a22: float = 1.0
    tx: float = 0.0
    ty: float = 0.0

    @classmethod
    def identity(cls) -> AffineParams:
        """Return the identity transform."""
        return cls()

    @classmethod
    def from_array(cls, values: ArrayLike) -> AffineParams:
        """Build from six values in ``(a11, a12, a21, a22, tx, ty)`` order."""
        array = np.asarray(values, dtype=np.float64).reshape(-1)
        if array.size != 6 or not np.all(np.isfinite(array)):
            msg = f"Affine transform needs six finite values, not {array}"
            raise InvalidArgumentError(msg)
        return cls(*(float(v) for v in array))

    def to_array(self) -> Array:
        """Return the six values in ``(a11, a12, a21, a22, tx, ty)`` order."""
        return np.array(
            [self.a11, self.a12, self.a21, self.a22, self.tx, self.ty]
        )


@dataclass(frozen=True)
class GraphTopology:
    """Undirected, connected landmark graph without self-loops.

    Use `from_edges`, `ring` or `complete` rather than the constructor, since
    they validate the graph and derive the neighbor lists.
    """

    num_vertices: int
    """Number of vertices K."""

    edges: tuple[tuple[int, int], ...]
    """Each undirected edge once, as ``(low, high)`` in sorted order."""

    neighbors: tuple[tuple[int, ...], ...] = field(repr=False)
    """Sorted neighbor indices of every vertex."""

    @classmethod
    def from_edges(
        cls, num_vertices: int, edges: Iterable[Sequence[int]]
    ) -> GraphTopology:
        """Build and validate a topology.

        Parameters
        ----------
        num_vertices
            Number of vertices K.
        edges
            Vertex pairs. Duplicates and reversed duplicates are merged.

        Raises
        ------
        InvalidArgumentError
            Raised on self-loops, out-of-range vertices or a disconnected
            graph.
        """
        if num_vertices < 1:
            raise InvalidArgumentError("A graph needs at least one vertex")
        unique: set[tuple[int, int]] = set()
        for edge in edges:
            a, b = (int(v) for v in edge)
            if a == b:
                raise InvalidArgumentError(f"Self-loop at vertex {a}")
            if not (0 <= a < num_vertices and 0 <= b < num_vertices):
                msg = f"Edge ({a}, {b}) outside {num_vertices} vertices"
                raise InvalidArgumentError(msg)
            unique.add((min(a, b), max(a, b)))
        adjacency: list[set[int]] = [set() for _ in range(num_vertices)]
        for a, b in unique:
            adjacency[a].add(b)
            adjacency[b].add(a)

        seen = {0}
        queue = deque([0])
        while queue:
            for neighbor in adjacency[queue.popleft()]:
                if neighbor not in seen:
                    seen.add(neighbor)
                    queue.append(neighbor)
        if len(seen) != num_vertices:
            raise InvalidArgumentError("Landmark graph is not connected")

        return cls(
            num_vertices=num_vertices,
            edges=tuple(sorted(unique)),
            neighbors=tuple(tuple(sorted(n)) for n in adjacency),
        )

    @classmethod
    def ring(cls, num_vertices: int) -> GraphTopology:
        """Build a cycle through the vertices in order."""
        if num_vertices < 3:
            pairs = [(i, i + 1) for i in range(num_vertices - 1)]
        else:
            pairs = [(i, (i + 1) % num_vertices) for i in range(num_vertices)]
        return cls.from_edges(num_vertices, pairs)

    @classmethod
    def complete(cls, num_vertices: int) -> GraphTopology:
        """Build the complete graph."""
        pairs = [
            (i, j)
            for i in range(num_vertices)
            for j in range(i + 1, num_vertices)
        ]
        return cls.from_edges(num_vertices, pairs)

    def adjacency(self) -> Array:
        """Return the symmetric 0/1 adjacency matrix."""
        matrix = np.zeros((self.num_vertices, self.num_vertices))
        for a, b in self.edges:
            matrix[a, b] = matrix[b, a] = 1.0
        return matrix

    def inverse_degrees(self) -> Array:
        """Return ``1 / degree`` per vertex, zero for isolated vertices."""
        degrees = np.array([len(n) for n in self.neighbors], dtype=np.float64)
        return np.divide(
            1.0, degrees, out=np.zeros_like(degrees), where=degrees > 0
        )
