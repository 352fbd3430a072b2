"""Structured triangulations of the unit square."""

import logging
from dataclasses import dataclass, fields
from typing import Union

import numpy as np

from .exceptions import InvalidArgumentError
from .models import BoundaryMode

logger = logging.getLogger(__name__)


def _freeze(obj) -> None:
    for f in fields(obj):
        value = getattr(obj, f.name)
        if isinstance(value, np.ndarray):
            value.flags.writeable = False


@dataclass(frozen=True)
class TriMesh:
    """Triangulation with globally oriented edges.

    Edges are stored low vertex first. ``cell_edges[c, k]`` is the edge
    opposite local vertex ``k`` and ``cell_edge_signs[c, k]`` is +1 when the
    counter-clockwise traversal of that edge runs from its low to its high
    vertex, i.e. when the global normal points out of cell ``c``.
    """

    n: int
    vertices: np.ndarray
    cells: np.ndarray
    edges: np.ndarray
    cell_edges: np.ndarray
    cell_edge_signs: np.ndarray
    edge_cells: np.ndarray
    boundary_edges: np.ndarray

    def __post_init__(self) -> None:
        _freeze(self)

    @property
    def nvertices(self) -> int:
        return len(self.vertices)

    @property
    def ncells(self) -> int:
        return len(self.cells)

    @property
    def nedges(self) -> int:
        return len(self.edges)

    @property
    def signed_areas(self) -> np.ndarray:
        p0, p1, p2 = (self.vertices[self.cells[:, k]] for k in range(3))
        e1, e2 = p1 - p0, p2 - p0
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @property
    def domain_area(self) -> float:
        return float(self.signed_areas.sum())

    @property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.cells].mean(axis=1)

    @property
    def edge_tangents(self) -> np.ndarray:
        """Unnormalized tangents from the low to the high vertex."""
        return self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]

    @property
    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.edge_tangents, axis=1)

    @property
    def edge_normals(self) -> np.ndarray:
        """Unit normals, the tangent rotated by -90 degrees."""
        t = self.edge_tangents / self.edge_lengths[:, None]
        return np.column_stack([t[:, 1], -t[:, 0]])


@dataclass(frozen=True)
class BoundaryTags:
    """Partitions of the boundary edges for the two sets of conditions."""

    mode: BoundaryMode
    gamma_p: np.ndarray
    gamma_f: np.ndarray
    gamma_d: np.ndarray
    gamma_t: np.ndarray

    def __post_init__(self) -> None:
        _freeze(self)

    @property
    def is_clamped(self) -> bool:
        return len(self.gamma_t) == 0


def _edge_adjacency(cell_edges: np.ndarray, nedges: int) -> np.ndarray:
    flat_edges = cell_edges.ravel()
    flat_cells = np.repeat(np.arange(len(cell_edges)), 3)
    order = np.lexsort((flat_cells, flat_edges))
    sorted_edges, sorted_cells = flat_edges[order], flat_cells[order]
    first = np.r_[True, sorted_edges[1:] != sorted_edges[:-1]]

    edge_cells = np.full((nedges, 2), -1, dtype=np.int64)
    edge_cells[sorted_edges[first], 0] = sorted_cells[first]
    edge_cells[sorted_edges[~first], 1] = sorted_cells[~first]
    return edge_cells


def build_unit_square_mesh(n: int) -> TriMesh:
    """Build the N x N grid on (0,1)^2 with each square cut along its
    lower-left to upper-right diagonal.

    Vertex (i, j) sits at (i/N, j/N) and has index j*(N+1) + i.

    Args:
        n: Number of squares per side.

    Returns:
        TriMesh: The triangulation.

    Raises:
        InvalidArgumentError: If n < 1.
    """
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"Mesh size must be a positive integer, got {n}", argument="N")
    n = int(n)

    coords = np.linspace(0.0, 1.0, n + 1)
    x, y = np.meshgrid(coords, coords)
    vertices = np.column_stack([x.ravel(), y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    a = (j * (n + 1) + i).ravel()
    b, c, d = a + 1, a + n + 2, a + n + 1
    cells = np.empty((2 * n * n, 3), dtype=np.int64)
    cells[0::2] = np.column_stack([a, b, c])
    cells[1::2] = np.column_stack([a, c, d])

    # local edge k joins local vertices k+1 and k+2
    local = np.stack(
        [cells[:, [1, 2]], cells[:, [2, 0]], cells[:, [0, 1]]], axis=1
    )
    edges, inverse = np.unique(
        np.sort(local, axis=2).reshape(-1, 2), axis=0, return_inverse=True
    )
    cell_edges = inverse.reshape(len(cells), 3)
    signs = np.where(local[:, :, 0] < local[:, :, 1], 1, -1)

    edge_cells = _edge_adjacency(cell_edges, len(edges))
    boundary_edges = np.flatnonzero(edge_cells[:, 1] < 0)

    logger.debug(
        "Built %dx%d mesh: %d vertices, %d cells, %d edges",
        n, n, len(vertices), len(cells), len(edges),
    )
    return TriMesh(
        n=n,
        vertices=vertices,
        cells=cells,
        edges=edges,
        cell_edges=cell_edges,
        cell_edge_signs=signs,
        edge_cells=edge_cells,
        boundary_edges=boundary_edges,
    )


def classify_boundary(mesh: TriMesh, mode: Union[BoundaryMode, str]) -> BoundaryTags:
    """Split the boundary for the given regime.

    Clamped puts every boundary edge in gamma_d; mixed moves the edges on
    y = 1 to gamma_t. The pressure is pure Neumann in both regimes.
    """
    mode = BoundaryMode(mode)
    boundary = mesh.boundary_edges
    if mode == BoundaryMode.CLAMPED:
        gamma_t = np.empty(0, dtype=np.int64)
    else:
        ends = mesh.vertices[mesh.edges[boundary]][:, :, 1]
        gamma_t = boundary[np.all(np.isclose(ends, 1.0), axis=1)]
    gamma_d = np.setdiff1d(boundary, gamma_t)
    return BoundaryTags(
        mode=mode,
        gamma_p=np.empty(0, dtype=np.int64),
        gamma_f=boundary.copy(),
        gamma_d=gamma_d,
        gamma_t=gamma_t,
    )


def edge_normal(mesh: TriMesh, edge: int) -> np.ndarray:
    """Return the unit normal of one edge.

    Raises:
        InvalidArgumentError: If the edge index is out of range.
    """
    if not 0 <= edge < mesh.nedges:
        raise InvalidArgumentError(
            f"Edge index {edge} out of range [0, {mesh.nedges})", argument="edge"
        )
    tangent = mesh.vertices[mesh.edges[edge, 1]] - mesh.vertices[mesh.edges[edge, 0]]
    tangent = tangent / np.linalg.norm(tangent)
    return np.array([tangent[1], -tangent[0]])


def format_mesh_dump(mesh: TriMesh) -> str:
    """Plain-text dump: vertex list then cell list."""
    lines = [f"# vertices {mesh.nvertices}"]
    lines.extend(f"{i} {x:.17g} {y:.17g}" for i, (x, y) in enumerate(mesh.vertices))
    lines.append(f"# cells {mesh.ncells}")
    lines.extend(f"{i} {a} {b} {c}" for i, (a, b, c) in enumerate(mesh.cells))
    return "\n".join(lines) + "\n"
