"""Assembly of the bilinear forms of the four-field Biot system and of the
stress inner products used by the preconditioners.

All matrices are ``scipy.sparse.csr_matrix`` over the full DOF range of their
spaces unless noted; :func:`assemble_system` restricts the stress space to its
free DOFs and pins the pressure.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sps

from .exceptions import DimensionMismatchError
from .mesh import TriMesh
from .models import ParameterSet, SpaceKind
from .quadrature import triangle_rule
from .spaces import BiotSpaces, DofMap, StressBasisTable, build_stress_basis

logger = logging.getLogger(__name__)

SYSTEM_LABELS = ("sigma", "p", "u", "gamma")
ELASTICITY_LABELS = ("sigma", "u", "gamma")


def apply_A_pointwise(sigma: np.ndarray, params: ParameterSet) -> np.ndarray:
    """Compliance tensor (1/2mu)(sigma - lambda/(2mu + n lambda) tr(sigma) I).

    Works on any array with trailing shape (2, 2).
    """
    sigma = np.asarray(sigma, dtype=float)
    trace = np.trace(sigma, axis1=-2, axis2=-1)
    out = sigma - params.trace_weight * trace[..., None, None] * np.eye(2)
    return out / (2.0 * params.mu)


# =============================================================================
# Quadrature helpers
# =============================================================================


@dataclass(frozen=True)
class _CellQuadrature:
    points: np.ndarray      # (C, Q, 2)
    weights: np.ndarray     # (C, Q), area included
    barycentric: np.ndarray  # (Q, 3)


def _cell_quadrature(mesh: TriMesh, degree: int) -> _CellQuadrature:
    rule = triangle_rule(degree)
    corners = mesh.vertices[mesh.cells]
    points = np.einsum("qk,ckd->cqd", rule.barycentric, corners)
    weights = mesh.areas[:, None] * rule.weights[None, :]
    return _CellQuadrature(points, weights, rule.barycentric)


def _basis(mesh: TriMesh, basis: Optional[StressBasisTable]) -> StressBasisTable:
    return basis if basis is not None else build_stress_basis(mesh)


def _check_kind(dofmap: DofMap, kind: SpaceKind) -> None:
    if dofmap.kind != kind:
        raise DimensionMismatchError(
            f"Expected a {kind.value} space, got {dofmap.kind.value}",
            expected=kind.value,
            actual=dofmap.kind.value,
        )


def _scatter(
    local: np.ndarray, rows: np.ndarray, cols: np.ndarray, shape: Tuple[int, int]
) -> sps.csr_matrix:
    r = np.broadcast_to(rows[:, :, None], local.shape)
    c = np.broadcast_to(cols[:, None, :], local.shape)
    matrix = sps.coo_matrix((local.ravel(), (r.ravel(), c.ravel())), shape=shape).tocsr()
    matrix.sum_duplicates()
    matrix.sort_indices()
    return matrix


def _scatter_symmetric(local: np.ndarray, dofs: np.ndarray, n: int) -> sps.csr_matrix:
    local = 0.5 * (local + local.transpose(0, 2, 1))
    return _scatter(local, dofs, dofs, (n, n))


# =============================================================================
# Stress forms
# =============================================================================


def _stress_values(mesh, basis, degree):
    quad = _cell_quadrature(mesh, degree)
    return quad, basis.matrix_values(quad.points)


def assemble_stress_form(
    mesh: TriMesh,
    stress_dofmap: DofMap,
    mass_weight: float = 1.0,
    trace_weight: float = 0.0,
    div_weight: float = 0.0,
    basis: Optional[StressBasisTable] = None,
    quadrature_degree: int = 4,
) -> sps.csr_matrix:
    """Assemble a (sigma:tau) + b (tr sigma, tr tau) + c (div sigma, div tau)."""
    _check_kind(stress_dofmap, SpaceKind.STRESS)
    basis = _basis(mesh, basis)
    quad, values = _stress_values(mesh, basis, quadrature_degree)

    local = np.zeros((mesh.ncells, 12, 12))
    if mass_weight:
        local += mass_weight * np.einsum("cqirs,cqjrs,cq->cij", values, values, quad.weights)
    if trace_weight:
        trace = np.trace(values, axis1=-2, axis2=-1)
        local += trace_weight * np.einsum("cqi,cqj,cq->cij", trace, trace, quad.weights)
    if div_weight:
        div = basis.matrix_divergence
        local += div_weight * np.einsum("cir,cjr,c->cij", div, div, mesh.areas)
    return _scatter_symmetric(local, stress_dofmap.cell_dofs, stress_dofmap.ndof)


def assemble_A(
    mesh: TriMesh,
    stress_dofmap: DofMap,
    params: ParameterSet,
    basis: Optional[StressBasisTable] = None,
    quadrature_degree: int = 4,
) -> sps.csr_matrix:
    """Assemble (A phi_j, phi_i) with the compliance applied at quadrature points."""
    _check_kind(stress_dofmap, SpaceKind.STRESS)
    basis = _basis(mesh, basis)
    quad, values = _stress_values(mesh, basis, quadrature_degree)
    compliance = apply_A_pointwise(values, params)
    local = np.einsum("cqirs,cqjrs,cq->cij", values, compliance, quad.weights)
    return _scatter_symmetric(local, stress_dofmap.cell_dofs, stress_dofmap.ndof)


def assemble_stress_mass(mesh, stress_dofmap, basis=None, quadrature_degree=4):
    return assemble_stress_form(
        mesh, stress_dofmap, 1.0, basis=basis, quadrature_degree=quadrature_degree
    )


def assemble_deviatoric_mass(mesh, stress_dofmap, basis=None, quadrature_degree=4):
    """(P_D sigma, P_D tau) = (sigma, tau) - (1/n)(tr sigma, tr tau)."""
    return assemble_stress_form(
        mesh, stress_dofmap, 1.0, -0.5, basis=basis, quadrature_degree=quadrature_degree
    )


def assemble_divdiv(mesh, stress_dofmap, basis=None):
    return assemble_stress_form(mesh, stress_dofmap, 0.0, 0.0, 1.0, basis=basis)


def assemble_sigma_riesz(
    mesh: TriMesh,
    stress_dofmap: DofMap,
    params: ParameterSet,
    basis: Optional[StressBasisTable] = None,
    quadrature_degree: int = 4,
) -> sps.csr_matrix:
    """Riesz matrix of (1/2mu)(sigma, tau) + (div sigma, div tau); lambda-free."""
    return assemble_stress_form(
        mesh,
        stress_dofmap,
        mass_weight=1.0 / (2.0 * params.mu),
        div_weight=1.0,
        basis=basis,
        quadrature_degree=quadrature_degree,
    )


def assemble_stress_operator(
    mesh: TriMesh,
    stress_dofmap: DofMap,
    params: ParameterSet,
    basis: Optional[StressBasisTable] = None,
) -> sps.csr_matrix:
    """(A sigma, tau) + (div sigma, div tau), the stress-only problem operator."""
    basis = _basis(mesh, basis)
    return (
        assemble_A(mesh, stress_dofmap, params, basis=basis)
        + assemble_divdiv(mesh, stress_dofmap, basis=basis)
    ).tocsr()


def _trace_integrals(mesh, stress_dofmap, basis, quadrature_degree):
    quad, values = _stress_values(mesh, basis, quadrature_degree)
    trace = np.trace(values, axis1=-2, axis2=-1)
    local = np.einsum("cqi,cq->ci", trace, quad.weights)
    return np.bincount(
        stress_dofmap.cell_dofs.ravel(), weights=local.ravel(), minlength=stress_dofmap.ndof
    )


def assemble_m_vector(
    mesh: TriMesh,
    stress_dofmap: DofMap,
    basis: Optional[StressBasisTable] = None,
    quadrature_degree: int = 4,
    dim: int = 2,
) -> np.ndarray:
    """m_i = (1/sqrt(n |Omega|)) int tr(phi_i)."""
    _check_kind(stress_dofmap, SpaceKind.STRESS)
    basis = _basis(mesh, basis)
    integrals = _trace_integrals(mesh, stress_dofmap, basis, quadrature_degree)
    return integrals / np.sqrt(dim * mesh.domain_area)


def assemble_sigma_aux(
    mesh: TriMesh,
    stress_dofmap: DofMap,
    params: ParameterSet,
    basis: Optional[StressBasisTable] = None,
    quadrature_degree: int = 4,
) -> np.ndarray:
    """Dense matrix of the auxiliary stress inner product.

    (1/2mu)(P0 sigma, P0 tau) + 1/(2mu + n lambda) ((I-P0) sigma, (I-P0) tau)
    + (div sigma, div tau), where P0 removes the mean trace. The rank-one
    coupling makes the matrix dense; meant for small meshes.
    """
    _check_kind(stress_dofmap, SpaceKind.STRESS)
    basis = _basis(mesh, basis)
    n, area = params.dim, mesh.domain_area

    # ((I-P0) sigma, (I-P0) tau) = (1/(n|Omega|)) int tr sigma int tr tau
    t = _trace_integrals(mesh, stress_dofmap, basis, quadrature_degree)
    mean_trace = np.outer(t, t) / (n * area)

    mass = assemble_stress_mass(mesh, stress_dofmap, basis, quadrature_degree).toarray()
    divdiv = assemble_divdiv(mesh, stress_dofmap, basis).toarray()
    return (
        (mass - mean_trace) / (2.0 * params.mu)
        + mean_trace / params.bulk_modulus_sum
        + divdiv
    )


# =============================================================================
# Coupling and constraint blocks
# =============================================================================


def assemble_bulk_coupling(
    mesh: TriMesh,
    stress_dofmap: DofMap,
    pressure_dofmap: DofMap,
    params: ParameterSet,
    basis: Optional[StressBasisTable] = None,
    quadrature_degree: int = 4,
) -> sps.csr_matrix:
    """(K phi_j, psi_i) = alpha/(2mu + n lambda) int tr(phi_j) psi_i.

    Rows are pressure DOFs, columns stress DOFs; no pinning applied.
    """
    _check_kind(stress_dofmap, SpaceKind.STRESS)
    _check_kind(pressure_dofmap, SpaceKind.PRESSURE)
    basis = _basis(mesh, basis)
    quad, values = _stress_values(mesh, basis, quadrature_degree)
    trace = np.trace(values, axis1=-2, axis2=-1)
    local = params.coupling_weight * np.einsum(
        "qk,cqj,cq->ckj", quad.barycentric, trace, quad.weights
    )
    return _scatter(
        local,
        pressure_dofmap.cell_dofs,
        stress_dofmap.cell_dofs,
        (pressure_dofmap.ndof, stress_dofmap.ndof),
    )


def assemble_div(
    mesh: TriMesh,
    stress_dofmap: DofMap,
    displacement_dofmap: DofMap,
    basis: Optional[StressBasisTable] = None,
) -> sps.csr_matrix:
    """(div phi_j, v_i) against the unit P0 vector fields."""
    _check_kind(stress_dofmap, SpaceKind.STRESS)
    _check_kind(displacement_dofmap, SpaceKind.DISPLACEMENT)
    basis = _basis(mesh, basis)
    div = basis.matrix_divergence                        # (C, 12, 2)
    local = div.transpose(0, 2, 1) * mesh.areas[:, None, None]
    return _scatter(
        local,
        displacement_dofmap.cell_dofs,
        stress_dofmap.cell_dofs,
        (displacement_dofmap.ndof, stress_dofmap.ndof),
    )


def assemble_skw(
    mesh: TriMesh,
    stress_dofmap: DofMap,
    rotation_dofmap: DofMap,
    basis: Optional[StressBasisTable] = None,
    quadrature_degree: int = 4,
) -> sps.csr_matrix:
    """(phi_j, eta_i) with eta = [[0, q], [-q, 0]] and q the cell indicator."""
    _check_kind(stress_dofmap, SpaceKind.STRESS)
    _check_kind(rotation_dofmap, SpaceKind.ROTATION)
    basis = _basis(mesh, basis)
    quad, values = _stress_values(mesh, basis, quadrature_degree)
    skew = values[..., 0, 1] - values[..., 1, 0]
    local = np.einsum("cqj,cq->cj", skew, quad.weights)[:, None, :]
    return _scatter(
        local,
        rotation_dofmap.cell_dofs,
        stress_dofmap.cell_dofs,
        (rotation_dofmap.ndof, stress_dofmap.ndof),
    )


def assemble_p0_mass(mesh: TriMesh, dofmap: DofMap) -> np.ndarray:
    """Diagonal of the (exactly diagonal) mass matrix of a P0 space."""
    if dofmap.kind == SpaceKind.DISPLACEMENT:
        return np.repeat(mesh.areas, 2)
    _check_kind(dofmap, SpaceKind.ROTATION)
    # (eta, eta) = 2 q^2
    return 2.0 * mesh.areas


# =============================================================================
# Pressure forms
# =============================================================================


def _barycentric_gradients(mesh: TriMesh) -> np.ndarray:
    corners = mesh.vertices[mesh.cells]
    jac = np.stack([corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]], axis=2)
    inv = np.linalg.inv(jac)                             # rows: grad of lambda_1, lambda_2
    return np.concatenate([-inv.sum(axis=1, keepdims=True), inv], axis=1)


def assemble_pressure_mass(mesh, pressure_dofmap, quadrature_degree=4):
    _check_kind(pressure_dofmap, SpaceKind.PRESSURE)
    quad = _cell_quadrature(mesh, quadrature_degree)
    local = np.einsum("qk,ql,cq->ckl", quad.barycentric, quad.barycentric, quad.weights)
    return _scatter_symmetric(local, pressure_dofmap.cell_dofs, pressure_dofmap.ndof)


def assemble_pressure_stiffness(
    mesh: TriMesh,
    pressure_dofmap: DofMap,
    params: Optional[ParameterSet] = None,
    quadrature_degree: int = 4,
) -> sps.csr_matrix:
    """(kappa grad psi_j, grad psi_i); unit conductivity when params is None."""
    _check_kind(pressure_dofmap, SpaceKind.PRESSURE)
    quad = _cell_quadrature(mesh, quadrature_degree)
    if params is None:
        kappa_integral = mesh.areas
    else:
        kappa_integral = np.sum(params.conductivity(quad.points) * quad.weights, axis=1)
    grads = _barycentric_gradients(mesh)
    local = np.einsum("ckd,cld,c->ckl", grads, grads, kappa_integral)
    return _scatter_symmetric(local, pressure_dofmap.cell_dofs, pressure_dofmap.ndof)


def pin_dof(matrix: sps.spmatrix, dof: int) -> sps.csr_matrix:
    """Zero row and column ``dof`` of a square matrix and put 1 on the diagonal."""
    keep = np.ones(matrix.shape[0])
    keep[dof] = 0.0
    mask = sps.diags(keep)
    unit = sps.csr_matrix(([1.0], ([dof], [dof])), shape=matrix.shape)
    pinned = (mask @ matrix @ mask + unit).tocsr()
    pinned.eliminate_zeros()
    pinned.sort_indices()
    return pinned


def zero_rows(matrix: sps.spmatrix, rows: Sequence[int]) -> sps.csr_matrix:
    keep = np.ones(matrix.shape[0])
    keep[list(rows)] = 0.0
    out = (sps.diags(keep) @ matrix).tocsr()
    out.eliminate_zeros()
    return out


def assemble_pressure_block(
    mesh: TriMesh,
    pressure_dofmap: DofMap,
    params: ParameterSet,
    quadrature_degree: int = 4,
) -> sps.csr_matrix:
    """(C psi_j, psi_i) + (kappa grad psi_j, grad psi_i), pinned if needed."""
    block = params.pressure_mass_weight * assemble_pressure_mass(
        mesh, pressure_dofmap, quadrature_degree
    ) + assemble_pressure_stiffness(mesh, pressure_dofmap, params, quadrature_degree)
    if pressure_dofmap.pinned_dof is not None:
        return pin_dof(block, pressure_dofmap.pinned_dof)
    return block.tocsr()


# =============================================================================
# Block containers
# =============================================================================


@dataclass
class BlockVector:
    """Flat vector partitioned into labelled blocks."""

    data: np.ndarray
    sizes: Tuple[int, ...]
    labels: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (sum(self.sizes),):
            raise DimensionMismatchError(
                "Block sizes do not add up to the vector length",
                expected=sum(self.sizes),
                actual=self.data.shape,
            )

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    def block(self, index) -> np.ndarray:
        if isinstance(index, str):
            index = self.labels.index(index)
        start, stop = self.offsets[index], self.offsets[index + 1]
        return self.data[start:stop]

    def split(self) -> List[np.ndarray]:
        return [self.block(i) for i in range(len(self.sizes))]

    @classmethod
    def from_blocks(cls, blocks: Sequence[np.ndarray], labels: Sequence[str] = ()) -> "BlockVector":
        blocks = [np.asarray(b, dtype=float).ravel() for b in blocks]
        return cls(np.concatenate(blocks), tuple(len(b) for b in blocks), tuple(labels))

    @classmethod
    def zeros(cls, sizes: Sequence[int], labels: Sequence[str] = ()) -> "BlockVector":
        return cls(np.zeros(sum(sizes)), tuple(sizes), tuple(labels))


@dataclass(frozen=True)
class BlockSystem:
    """Symmetric block saddle-point operator with its right-hand side."""

    blocks: Tuple[Tuple[Optional[sps.csr_matrix], ...], ...]
    rhs: BlockVector
    labels: Tuple[str, ...]
    matrix: sps.csr_matrix = field(repr=False)

    @property
    def sizes(self) -> Tuple[int, ...]:
        return self.rhs.sizes

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    def block(self, row: str, col: str) -> Optional[sps.csr_matrix]:
        return self.blocks[self.labels.index(row)][self.labels.index(col)]

    def symmetry_defect(self) -> float:
        """max |M - M^T| over the full matrix."""
        diff = (self.matrix - self.matrix.T).tocoo()
        return float(np.abs(diff.data).max()) if diff.nnz else 0.0


def _build_block_system(grid, rhs_blocks, labels) -> BlockSystem:
    matrix = sps.bmat(grid, format="csr")
    matrix.sort_indices()
    rhs = BlockVector.from_blocks(rhs_blocks, labels)
    frozen = tuple(tuple(row) for row in grid)
    return BlockSystem(blocks=frozen, rhs=rhs, labels=tuple(labels), matrix=matrix)


def _check_spaces(spaces: BiotSpaces) -> None:
    mesh = spaces.mesh
    expected = {
        "stress": 4 * mesh.nedges,
        "pressure": mesh.nvertices,
        "displacement": 2 * mesh.ncells,
        "rotation": mesh.ncells,
    }
    for name, size in expected.items():
        actual = getattr(spaces, name).ndof
        if actual != size:
            raise DimensionMismatchError(
                f"{name} space has {actual} DOFs, mesh implies {size}",
                expected=size,
                actual=actual,
            )
    if spaces.basis.ncells != mesh.ncells:
        raise DimensionMismatchError(
            "Stress basis table was built on another mesh",
            expected=mesh.ncells,
            actual=spaces.basis.ncells,
        )


def _check_load(name: str, vector: Optional[np.ndarray], size: int) -> np.ndarray:
    if vector is None:
        return np.zeros(size)
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (size,):
        raise DimensionMismatchError(
            f"Load vector {name} has shape {vector.shape}, expected ({size},)",
            expected=(size,),
            actual=vector.shape,
        )
    return vector


@dataclass(frozen=True)
class SystemParts:
    """The individually assembled pieces reused by preconditioners and checks."""

    A: sps.csr_matrix
    K: sps.csr_matrix
    pressure: sps.csr_matrix
    div: sps.csr_matrix
    skw: sps.csr_matrix
    free: np.ndarray


def assemble_parts(spaces: BiotSpaces, params: ParameterSet) -> SystemParts:
    """Assemble every block restricted to the free stress DOFs."""
    _check_spaces(spaces)
    mesh, basis = spaces.mesh, spaces.basis
    free = spaces.stress.free_dofs

    A = assemble_A(mesh, spaces.stress, params, basis=basis)[free][:, free]
    div = assemble_div(mesh, spaces.stress, spaces.displacement, basis=basis)[:, free]
    skw = assemble_skw(mesh, spaces.stress, spaces.rotation, basis=basis)[:, free]
    K = assemble_bulk_coupling(mesh, spaces.stress, spaces.pressure, params, basis=basis)
    K = K[:, free]
    pressure = assemble_pressure_block(mesh, spaces.pressure, params)
    if spaces.pressure.pinned_dof is not None:
        K = zero_rows(K, [spaces.pressure.pinned_dof])
    return SystemParts(
        A=A.tocsr(), K=K.tocsr(), pressure=pressure, div=div.tocsr(), skw=skw.tocsr(), free=free
    )


def assemble_system(
    spaces: BiotSpaces,
    params: ParameterSet,
    f: Optional[np.ndarray] = None,
    g: Optional[np.ndarray] = None,
    parts: Optional[SystemParts] = None,
) -> BlockSystem:
    """Assemble the (sigma, p, u, gamma) system with right-hand side (0, g, -f, 0).

    Args:
        spaces: Spaces built on one mesh and boundary partition.
        params: Material parameters.
        f: Displacement load vector (dual, one entry per displacement DOF).
        g: Pressure load vector (dual, one entry per pressure DOF).
        parts: Previously assembled blocks to reuse.

    Raises:
        DimensionMismatchError: If spaces or loads are inconsistent.
    """
    parts = parts or assemble_parts(spaces, params)
    f = _check_load("f", f, spaces.displacement.ndof)
    g = _check_load("g", g, spaces.pressure.ndof).copy()
    if spaces.pressure.pinned_dof is not None:
        g[spaces.pressure.pinned_dof] = 0.0

    grid = [
        [parts.A, parts.K.T, parts.div.T, parts.skw.T],
        [parts.K, parts.pressure, None, None],
        [parts.div, None, None, None],
        [parts.skw, None, None, None],
    ]
    system = _build_block_system(
        grid, [np.zeros(len(parts.free)), g, -f, np.zeros(spaces.rotation.ndof)], SYSTEM_LABELS
    )
    logger.debug("Assembled Biot system of size %d, nnz %d", system.shape[0], system.matrix.nnz)
    return system


def assemble_elasticity_system(
    spaces: BiotSpaces,
    params: ParameterSet,
    f: Optional[np.ndarray] = None,
    parts: Optional[SystemParts] = None,
) -> BlockSystem:
    """Assemble the mixed elasticity system (sigma, u, gamma) with rhs (0, -f, 0)."""
    if parts is None:
        _check_spaces(spaces)
        mesh, basis, free = spaces.mesh, spaces.basis, spaces.stress.free_dofs
        A = assemble_A(mesh, spaces.stress, params, basis=basis)[free][:, free].tocsr()
        div = assemble_div(mesh, spaces.stress, spaces.displacement, basis=basis)[:, free].tocsr()
        skw = assemble_skw(mesh, spaces.stress, spaces.rotation, basis=basis)[:, free].tocsr()
    else:
        A, div, skw, free = parts.A, parts.div, parts.skw, parts.free
    f = _check_load("f", f, spaces.displacement.ndof)
    grid = [[A, div.T, skw.T], [div, None, None], [skw, None, None]]
    return _build_block_system(
        grid, [np.zeros(len(free)), -f, np.zeros(spaces.rotation.ndof)], ELASTICITY_LABELS
    )


def block_sizes(spaces: BiotSpaces) -> Dict[str, int]:
    return {
        "sigma": spaces.stress.nfree,
        "p": spaces.pressure.ndof,
        "u": spaces.displacement.ndof,
        "gamma": spaces.rotation.ndof,
    }
