"""Discrete spaces: row-wise BDM1 stresses, P0 displacements and rotations,
continuous P1 pressures.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .exceptions import DimensionMismatchError, InvalidArgumentError, InvalidStateError
from .mesh import BoundaryTags, TriMesh, _freeze, classify_boundary
from .models import BoundaryMode, SpaceKind
from .quadrature import edge_rule

logger = logging.getLogger(__name__)

# vector shapes per cell, matrix shapes per cell
NLOCAL_VECTOR = 6
NLOCAL_STRESS = 12


@dataclass(frozen=True)
class DofMap:
    """Degree-of-freedom layout of one space.

    ``entity_dofs`` is indexed by the owning entity: ``[edge, row, moment]``
    for stresses, ``[cell, component]`` for displacements, ``[cell, 0]`` for
    rotations and ``[vertex, 0]`` for pressures. ``cell_dofs`` lists the
    global DOFs seen by each cell in local order.
    """

    kind: SpaceKind
    ndof: int
    entity_dofs: np.ndarray
    cell_dofs: np.ndarray
    constrained: np.ndarray
    pinned_dof: Optional[int] = None

    def __post_init__(self) -> None:
        _freeze(self)

    @property
    def free_dofs(self) -> np.ndarray:
        return np.flatnonzero(~self.constrained)

    @property
    def nfree(self) -> int:
        return int(self.ndof - self.constrained.sum())


def _stress_space(mesh: TriMesh, tags: BoundaryTags) -> DofMap:
    nedges = mesh.nedges
    entity = np.arange(4 * nedges).reshape(2, nedges, 2).transpose(1, 0, 2)

    # local order: row-major over (row, local edge, moment)
    cell_dofs = entity[mesh.cell_edges]              # (C, 3, row, moment)
    cell_dofs = cell_dofs.transpose(0, 2, 1, 3).reshape(mesh.ncells, NLOCAL_STRESS)

    constrained = np.zeros(4 * nedges, dtype=bool)
    constrained[entity[tags.gamma_t].ravel()] = True
    return DofMap(SpaceKind.STRESS, 4 * nedges, entity, cell_dofs, constrained)


def build_space(
    mesh: TriMesh, tags: BoundaryTags, kind: Union[SpaceKind, str]
) -> DofMap:
    """Build the DOF map of one space.

    Args:
        mesh: The triangulation.
        tags: Boundary partition; stress DOFs on gamma_t are constrained.
        kind: Which space to build.

    Returns:
        DofMap: The layout. Pressure spaces with an empty gamma_p pin the
        DOF of vertex (0, 0).
    """
    kind = SpaceKind(kind)
    ncells = mesh.ncells

    if kind == SpaceKind.STRESS:
        return _stress_space(mesh, tags)

    if kind == SpaceKind.DISPLACEMENT:
        entity = np.arange(2 * ncells).reshape(ncells, 2)
        return DofMap(kind, 2 * ncells, entity, entity.copy(), np.zeros(2 * ncells, bool))

    if kind == SpaceKind.ROTATION:
        entity = np.arange(ncells).reshape(ncells, 1)
        return DofMap(kind, ncells, entity, entity.copy(), np.zeros(ncells, bool))

    entity = np.arange(mesh.nvertices).reshape(-1, 1)
    pinned = None
    if len(tags.gamma_p) == 0:
        origin = np.flatnonzero(np.all(np.isclose(mesh.vertices, 0.0), axis=1))
        pinned = int(origin[0])
    return DofMap(
        kind,
        mesh.nvertices,
        entity,
        mesh.cells.copy(),
        np.zeros(mesh.nvertices, dtype=bool),
        pinned_dof=pinned,
    )


# =============================================================================
# BDM1 basis
# =============================================================================


@dataclass(frozen=True)
class StressBasisTable:
    """Per-cell BDM1 vector shapes in scaled monomial form.

    Vector shape ``a`` of cell ``c`` is
    ``v_d = sum_m coefficients[c, a, d, m] * p_m`` with
    ``p = (1, (x - xc)/h, (y - yc)/h)``. Matrix shape ``6*r + a`` carries
    vector shape ``a`` in row ``r`` and zeros in the other row.
    """

    centroids: np.ndarray
    scales: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        _freeze(self)

    @property
    def ncells(self) -> int:
        return len(self.scales)

    def _monomials(self, points: np.ndarray) -> np.ndarray:
        shape = points.shape
        pts = points.reshape(self.ncells, -1, 2)
        scaled = (pts - self.centroids[:, None, :]) / self.scales[:, None, None]
        mono = np.concatenate([np.ones(pts.shape[:2] + (1,)), scaled], axis=2)
        return mono, shape[1:-1]

    def vector_values(self, points: np.ndarray) -> np.ndarray:
        """Evaluate the vector shapes at per-cell points (C, ..., 2)."""
        mono, rest = self._monomials(points)
        values = np.einsum("cadm,cqm->cqad", self.coefficients, mono)
        return values.reshape((self.ncells,) + rest + (NLOCAL_VECTOR, 2))

    @property
    def vector_divergence(self) -> np.ndarray:
        """Constant divergence of each vector shape, shape (C, 6)."""
        c = self.coefficients
        return (c[:, :, 0, 1] + c[:, :, 1, 2]) / self.scales[:, None]

    def matrix_values(self, points: np.ndarray) -> np.ndarray:
        """Evaluate the 12 matrix shapes, shape (C, ..., 12, 2, 2)."""
        vec = self.vector_values(points)
        out = np.zeros(vec.shape[:-2] + (NLOCAL_STRESS, 2, 2))
        out[..., :NLOCAL_VECTOR, 0, :] = vec
        out[..., NLOCAL_VECTOR:, 1, :] = vec
        return out

    @property
    def matrix_divergence(self) -> np.ndarray:
        """Row-wise divergence of each matrix shape, shape (C, 12, 2)."""
        div = self.vector_divergence
        out = np.zeros((self.ncells, NLOCAL_STRESS, 2))
        out[:, :NLOCAL_VECTOR, 0] = div
        out[:, NLOCAL_VECTOR:, 1] = div
        return out


def _local_edge_quadrature(mesh: TriMesh):
    """Edge quadrature seen from every cell.

    Returns points (C, 3, Q, 2), weights (C, 3, Q) including the edge length,
    Legendre values (Q, 2) in the global edge parameter and the global unit
    normals (C, 3, 2).
    """
    s, w = edge_rule()
    edges = mesh.edges[mesh.cell_edges]                    # (C, 3, 2)
    start = mesh.vertices[edges[..., 0]]
    stop = mesh.vertices[edges[..., 1]]
    points = start[:, :, None, :] + s[None, None, :, None] * (stop - start)[:, :, None, :]
    lengths = mesh.edge_lengths[mesh.cell_edges]
    weights = lengths[:, :, None] * w[None, None, :]
    legendre = np.column_stack([np.ones_like(s), 2.0 * s - 1.0])
    normals = mesh.edge_normals[mesh.cell_edges]
    return points, weights, legendre, normals


def build_stress_basis(mesh: TriMesh) -> StressBasisTable:
    """Construct the dual basis of the edge-moment functionals on every cell."""
    centroids = mesh.centroids
    scales = np.sqrt(2.0 * mesh.areas)
    table = StressBasisTable(centroids, scales, np.zeros((mesh.ncells, 6, 2, 3)))

    points, weights, legendre, normals = _local_edge_quadrature(mesh)
    mono, _ = table._monomials(points)
    mono = mono.reshape(mesh.ncells, 3, -1, 3)

    # functional (edge k, moment j) applied to e_d * p_m
    functionals = np.einsum(
        "ckq,qj,ckd,ckqm->ckjdm", weights, legendre, normals, mono
    ).reshape(mesh.ncells, NLOCAL_VECTOR, NLOCAL_VECTOR)
    inverse = np.linalg.inv(functionals)
    coefficients = inverse.transpose(0, 2, 1).reshape(mesh.ncells, NLOCAL_VECTOR, 2, 3)
    return StressBasisTable(centroids, scales, coefficients)


def local_edge_moments(mesh: TriMesh, table: StressBasisTable) -> np.ndarray:
    """Moments of every vector shape on every edge of its own cell.

    Returns an array (C, 6 functionals, 6 shapes) that equals the identity
    per cell when the basis is dual to the functionals.
    """
    points, weights, legendre, normals = _local_edge_quadrature(mesh)
    values = table.vector_values(points)                   # (C, 3, Q, 6, 2)
    normal_trace = np.einsum("ckqad,ckd->ckqa", values, normals)
    moments = np.einsum("ckq,qj,ckqa->ckja", weights, legendre, normal_trace)
    return moments.reshape(mesh.ncells, NLOCAL_VECTOR, NLOCAL_VECTOR)


def stress_trace_moments(
    mesh: TriMesh, table: StressBasisTable, dofmap: DofMap, coefficients: np.ndarray
) -> np.ndarray:
    """Normal-trace moments of a stress field computed from inside each cell.

    Returns an array (C, 3 local edges, 2 rows, 2 moments) using the global
    edge normal.
    """
    if coefficients.shape != (dofmap.ndof,):
        raise DimensionMismatchError(
            "Coefficient vector does not match the stress space",
            expected=(dofmap.ndof,),
            actual=coefficients.shape,
        )
    points, weights, legendre, normals = _local_edge_quadrature(mesh)
    field = evaluate_stress(table, dofmap, coefficients, points)   # (C, 3, Q, 2, 2)
    normal_trace = np.einsum("ckqrd,ckd->ckqr", field, normals)
    return np.einsum("ckq,qj,ckqr->ckrj", weights, legendre, normal_trace)


def evaluate_stress(
    table: StressBasisTable, dofmap: DofMap, coefficients: np.ndarray, points: np.ndarray
) -> np.ndarray:
    """Evaluate sum_i c_i phi_i at per-cell points (C, ..., 2)."""
    local = coefficients[dofmap.cell_dofs]                 # (C, 12)
    values = table.matrix_values(points)
    return np.einsum("ci,c...irs->c...rs", local, values)


def bdm1_edge_moments(
    field: Callable[[np.ndarray], np.ndarray], mesh: TriMesh, edge: int
) -> np.ndarray:
    """Degree-0 and degree-1 normal moments of a vector field on one edge.

    The field maps points (Q, 2) to values (Q, 2). Moments are
    ``int_e v.n ds`` and ``int_e v.n (2s - 1) ds`` with ``s`` running from the
    low to the high vertex.
    """
    if not 0 <= edge < mesh.nedges:
        raise InvalidArgumentError(
            f"Edge index {edge} out of range [0, {mesh.nedges})", argument="edge"
        )
    s, w = edge_rule()
    start, stop = mesh.vertices[mesh.edges[edge]]
    points = start + s[:, None] * (stop - start)
    normal_trace = np.asarray(field(points), dtype=float) @ mesh.edge_normals[edge]
    weights = w * mesh.edge_lengths[edge]
    return np.array([weights @ normal_trace, weights @ (normal_trace * (2.0 * s - 1.0))])


def interpolate_identity(dofmap: DofMap, mesh: TriMesh) -> np.ndarray:
    """Coefficients w of the identity tensor in the stress space.

    Raises:
        InvalidStateError: If any stress DOF is constrained, since the
            identity violates sigma.n = 0 on gamma_t.
    """
    if dofmap.kind != SpaceKind.STRESS:
        raise InvalidArgumentError("Identity interpolant needs the stress space", argument="dofmap")
    if dofmap.constrained.any():
        raise InvalidStateError(
            "The identity tensor is not in the stress space under mixed conditions",
            state="mixed",
        )
    w = np.zeros(dofmap.ndof)
    flux = mesh.edge_normals * mesh.edge_lengths[:, None]   # rows of I are unit vectors
    for row in range(2):
        w[dofmap.entity_dofs[:, row, 0]] = flux[:, row]
    return w


# =============================================================================
# Bundle
# =============================================================================


@dataclass(frozen=True)
class BiotSpaces:
    """All four spaces of the system built on one mesh and boundary partition."""

    mesh: TriMesh
    tags: BoundaryTags
    stress: DofMap
    pressure: DofMap
    displacement: DofMap
    rotation: DofMap
    basis: StressBasisTable

    @property
    def mode(self) -> BoundaryMode:
        return self.tags.mode


def build_biot_spaces(mesh: TriMesh, mode: Union[BoundaryMode, str]) -> BiotSpaces:
    """Classify the boundary and build every space plus the stress basis."""
    tags = classify_boundary(mesh, mode)
    spaces = BiotSpaces(
        mesh=mesh,
        tags=tags,
        stress=build_space(mesh, tags, SpaceKind.STRESS),
        pressure=build_space(mesh, tags, SpaceKind.PRESSURE),
        displacement=build_space(mesh, tags, SpaceKind.DISPLACEMENT),
        rotation=build_space(mesh, tags, SpaceKind.ROTATION),
        basis=build_stress_basis(mesh),
    )
    logger.debug(
        "Spaces on N=%d (%s): stress %d (%d free), pressure %d, displacement %d, rotation %d",
        mesh.n, tags.mode.value, spaces.stress.ndof, spaces.stress.nfree,
        spaces.pressure.ndof, spaces.displacement.ndof, spaces.rotation.ndof,
    )
    return spaces
