"""Block-diagonal Riesz-map preconditioners for the Biot and elasticity
systems, including the rank-one corrected stress block for clamped
boundaries, and a Lanczos condition-number estimate.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator

from .assembly import (
    ELASTICITY_LABELS,
    SYSTEM_LABELS,
    BlockVector,
    SystemParts,
    assemble_m_vector,
    assemble_p0_mass,
    assemble_pressure_block,
    assemble_sigma_riesz,
)
from .exceptions import DimensionMismatchError, InvalidStateError, NotPositiveDefiniteError
from .krylov import as_matvec, seeded_random_vector
from .models import BoundaryMode, ParameterSet
from .sparsela import SymFactor, ldlt_factor, ldlt_solve
from .spaces import BiotSpaces, interpolate_identity

logger = logging.getLogger(__name__)


# =============================================================================
# Rank-one correction
# =============================================================================


@dataclass(frozen=True)
class RankOneData:
    """Data of V = I + a w m^T and V^-1 = I + b w m^T."""

    rho: float
    a: float
    b: float
    scale: float
    w: np.ndarray = field(repr=False)
    m: np.ndarray = field(repr=False)

    def apply_v(self, x: np.ndarray) -> np.ndarray:
        return x + self.a * self.w * (self.m @ x)

    def apply_v_transpose(self, x: np.ndarray) -> np.ndarray:
        return x + self.a * self.m * (self.w @ x)

    def apply_v_inverse(self, x: np.ndarray) -> np.ndarray:
        return x + self.b * self.w * (self.m @ x)

    def apply_v_inverse_transpose(self, x: np.ndarray) -> np.ndarray:
        return x + self.b * self.m * (self.w @ x)


def build_rank_one(
    params: ParameterSet, w: np.ndarray, m: np.ndarray, domain_area: float = 1.0
) -> RankOneData:
    """Scalars of the congruence V^T B V = P.

    a = (sqrt(1 - rho) - 1) / s and b = (1 - sqrt(1 - rho)) / (sqrt(1 - rho) s)
    with s = sqrt(n |Omega|). 1 - sqrt(1 - rho) is evaluated as
    rho / (1 + sqrt(1 - rho)).
    """
    w = np.asarray(w, dtype=float)
    m = np.asarray(m, dtype=float)
    if w.shape != m.shape:
        raise DimensionMismatchError("w and m differ in length", expected=w.shape, actual=m.shape)
    scale = np.sqrt(params.dim * domain_area)
    rho = params.rho
    root = np.sqrt(params.one_minus_rho)
    gap = rho / (1.0 + root)
    return RankOneData(rho=rho, a=-gap / scale, b=gap / (root * scale), scale=scale, w=w, m=m)


def apply_stress_precond_clamped(
    factor: SymFactor, rank_one: RankOneData, x: np.ndarray
) -> np.ndarray:
    """V^-1 D V^-T x with D = B^-1 given by its factor."""
    y = rank_one.apply_v_inverse_transpose(x)
    y = ldlt_solve(factor, y)
    return rank_one.apply_v_inverse(y)


def congruence_operator(riesz, rank_one: RankOneData) -> LinearOperator:
    """Matrix-free P = V^T B V."""
    n = len(rank_one.w)

    def matvec(x):
        x = np.ravel(x)
        return rank_one.apply_v_transpose(riesz @ rank_one.apply_v(x))

    return LinearOperator((n, n), matvec=matvec, rmatvec=matvec, dtype=float)


# =============================================================================
# Block solvers
# =============================================================================


class BlockSolver(ABC):
    """Approximate inverse of one diagonal block."""

    @property
    @abstractmethod
    def size(self) -> int:
        """Order of the block."""

    @abstractmethod
    def apply(self, r: np.ndarray) -> np.ndarray:
        """Apply the inverse to a block residual."""


class DiagonalSolver(BlockSolver):
    """Inverse of a diagonal matrix."""

    def __init__(self, diagonal: np.ndarray) -> None:
        diagonal = np.asarray(diagonal, dtype=float)
        if np.any(diagonal <= 0.0):
            raise NotPositiveDefiniteError("Diagonal block has non-positive entries")
        self._inverse = 1.0 / diagonal

    @property
    def size(self) -> int:
        return len(self._inverse)

    def apply(self, r: np.ndarray) -> np.ndarray:
        return self._inverse * r


class FactorSolver(BlockSolver):
    """Exact inverse through an LDL^T factor."""

    def __init__(self, factor: SymFactor) -> None:
        self.factor = factor

    @property
    def size(self) -> int:
        return self.factor.n

    def apply(self, r: np.ndarray) -> np.ndarray:
        return ldlt_solve(self.factor, r)


class RankOneCorrectedSolver(FactorSolver):
    """P^-1 = V^-1 B^-1 V^-T for the clamped stress block."""

    def __init__(self, factor: SymFactor, rank_one: RankOneData) -> None:
        super().__init__(factor)
        if len(rank_one.w) != factor.n:
            raise DimensionMismatchError(
                "Rank-one data does not match the factor",
                expected=factor.n,
                actual=len(rank_one.w),
            )
        self.rank_one = rank_one

    def apply(self, r: np.ndarray) -> np.ndarray:
        return apply_stress_precond_clamped(self.factor, self.rank_one, r)


# =============================================================================
# Block preconditioner
# =============================================================================


@dataclass
class BlockPrecond:
    """Block-diagonal SPD preconditioner."""

    solvers: Tuple[BlockSolver, ...]
    labels: Tuple[str, ...]
    mode: BoundaryMode
    dtype: type = float

    @property
    def sizes(self) -> Tuple[int, ...]:
        return tuple(s.size for s in self.solvers)

    @property
    def shape(self) -> Tuple[int, int]:
        n = sum(self.sizes)
        return (n, n)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        return apply_block_precond(self, BlockVector(x, self.sizes, self.labels)).data

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator(self.shape, matvec=self.matvec, rmatvec=self.matvec, dtype=float)


def apply_block_precond(bp: BlockPrecond, r: BlockVector) -> BlockVector:
    """Apply each block solver to its part of the residual.

    Raises:
        DimensionMismatchError: If the residual partition differs.
    """
    if tuple(r.sizes) != bp.sizes:
        raise DimensionMismatchError(
            "Residual partition does not match the preconditioner",
            expected=bp.sizes,
            actual=tuple(r.sizes),
        )
    out = [solver.apply(block) for solver, block in zip(bp.solvers, r.split())]
    return BlockVector.from_blocks(out, bp.labels)


def factor_sigma_riesz(spaces: BiotSpaces, params: ParameterSet) -> SymFactor:
    """LDL^T of the stress Riesz matrix restricted to free DOFs."""
    free = spaces.stress.free_dofs
    riesz = assemble_sigma_riesz(spaces.mesh, spaces.stress, params, basis=spaces.basis)
    return ldlt_factor(riesz[free][:, free])


def build_rank_one_for(spaces: BiotSpaces, params: ParameterSet) -> RankOneData:
    """Rank-one data from the identity interpolant and the trace vector."""
    if not spaces.tags.is_clamped:
        raise InvalidStateError(
            "The rank-one correction only applies to clamped boundaries", state="mixed"
        )
    w = interpolate_identity(spaces.stress, spaces.mesh)
    m = assemble_m_vector(spaces.mesh, spaces.stress, basis=spaces.basis, dim=params.dim)
    return build_rank_one(params, w, m, spaces.mesh.domain_area)


def build_stress_solver(
    spaces: BiotSpaces,
    params: ParameterSet,
    riesz_factor: Optional[SymFactor] = None,
) -> BlockSolver:
    """Plain B^-1 for mixed boundaries, V^-1 B^-1 V^-T for clamped ones.

    The Riesz matrix does not depend on lambda, so a factor can be shared
    across a lambda sweep.
    """
    factor = riesz_factor if riesz_factor is not None else factor_sigma_riesz(spaces, params)
    if spaces.tags.is_clamped:
        return RankOneCorrectedSolver(factor, build_rank_one_for(spaces, params))
    return FactorSolver(factor)


def build_block_precond(
    spaces: BiotSpaces,
    params: ParameterSet,
    with_pressure: bool = True,
    riesz_factor: Optional[SymFactor] = None,
    parts: Optional[SystemParts] = None,
) -> BlockPrecond:
    """Riesz-map preconditioner for the Biot system or, without pressure,
    for the mixed elasticity system.
    """
    stress = build_stress_solver(spaces, params, riesz_factor)
    displacement = DiagonalSolver(assemble_p0_mass(spaces.mesh, spaces.displacement))
    rotation = DiagonalSolver(assemble_p0_mass(spaces.mesh, spaces.rotation))
    mode = spaces.tags.mode
    if not with_pressure:
        return BlockPrecond((stress, displacement, rotation), ELASTICITY_LABELS, mode)

    block = parts.pressure if parts is not None else assemble_pressure_block(
        spaces.mesh, spaces.pressure, params
    )
    pressure = FactorSolver(ldlt_factor(block))
    return BlockPrecond((stress, pressure, displacement, rotation), SYSTEM_LABELS, mode)


# =============================================================================
# Condition estimate
# =============================================================================


@dataclass(frozen=True)
class ConditionEstimate:
    """Extreme Ritz values of the preconditioned operator."""

    lo: float
    hi: float
    condition: float
    iterations: int
    breakdown: bool
    ritz_values: np.ndarray = field(repr=False)

    @property
    def definite(self) -> bool:
        return bool(np.all(self.ritz_values > 0.0))


def condition_estimate(
    op, precond, iters: int = 50, seed: int = 0, breakdown_tol: float = 1e-12
) -> ConditionEstimate:
    """Estimate K(BA) by Lanczos on BA in the B^-1 inner product.

    ``lo`` and ``hi`` are the smallest and largest Ritz values in modulus, so
    that K = hi/lo covers both definite and indefinite operators. An
    invariant subspace ends the iteration early and sets ``breakdown``.

    Raises:
        NotPositiveDefiniteError: If the preconditioner is not SPD.
    """
    apply_op = as_matvec(op)
    apply_precond = as_matvec(precond)
    n = op.shape[0]

    r = seeded_random_vector(n, seed)
    z = apply_precond(r)
    beta2 = float(r @ z)
    if beta2 <= 0.0:
        raise NotPositiveDefiniteError("Preconditioner is not positive definite", value=beta2)
    beta = np.sqrt(beta2)
    u, v = r / beta, z / beta
    u_prev = np.zeros(n)
    beta_prev = 0.0

    alphas, betas = [], []
    breakdown = False
    for _ in range(min(iters, n)):
        w = apply_op(v)
        alpha = float(v @ w)
        w = w - alpha * u - beta_prev * u_prev
        alphas.append(alpha)
        z = apply_precond(w)
        beta2 = float(w @ z)
        if beta2 < 0.0:
            raise NotPositiveDefiniteError("Preconditioner is not positive definite", value=beta2)
        beta = np.sqrt(beta2)
        if beta <= breakdown_tol * max(1.0, max(abs(a) for a in alphas)):
            breakdown = True
            break
        betas.append(beta)
        u_prev, u, v = u, w / beta, z / beta
        beta_prev = beta

    k = len(alphas)
    ritz = scipy.linalg.eigh_tridiagonal(
        np.array(alphas), np.array(betas[: k - 1]), eigvals_only=True
    )
    modulus = np.abs(ritz)
    lo, hi = float(modulus.min()), float(modulus.max())
    condition = hi / lo if lo > 0.0 else np.inf
    logger.debug("Lanczos: %d steps, Ritz range [%.3e, %.3e], K=%.4g", k, lo, hi, condition)
    return ConditionEstimate(lo, hi, condition, k, breakdown, ritz)
