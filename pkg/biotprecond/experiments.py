"""Iteration-count experiments: the stress-only problem (case 1), mixed
elasticity (case 2) and the full Biot system with constant (case 3) or
layered (case 4) conductivity.
"""

import itertools
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sps

from .assembly import (
    assemble_elasticity_system,
    assemble_parts,
    assemble_stress_operator,
    assemble_system,
)
from .config import SolverConfig
from .exceptions import NegativeCurvatureError
from .krylov import KrylovReport, pcg, pminres, seeded_random_vector
from .mesh import build_unit_square_mesh
from .models import BoundaryMode, CaseKind, IterationRecord, KappaProfile, ParameterSet
from .precond import build_block_precond, build_stress_solver, factor_sigma_riesz
from .sparsela import SymFactor
from .spaces import BiotSpaces, build_biot_spaces

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepPoint:
    """One parameter point of a sweep."""

    case: CaseKind
    bc: BoundaryMode
    n: int
    lam: float
    alpha: Optional[float] = None
    kappa: Optional[float] = None

    @property
    def key(self) -> str:
        parts = [self.case.value, self.bc.value, f"N={self.n}", f"lambda={self.lam:g}"]
        if self.alpha is not None:
            parts.append(f"alpha={self.alpha:g}")
        if self.kappa is not None:
            parts.append(f"kappa={self.kappa:g}")
        return "/".join(parts)


@dataclass(frozen=True)
class CellResult:
    """A table cell together with the solve behind it."""

    point: SweepPoint
    record: IterationRecord
    report: KrylovReport


@dataclass(frozen=True)
class _MeshContext:
    spaces: BiotSpaces
    riesz_factor: SymFactor


class ExperimentRunner:
    """Runs sweeps on shared, lazily built spaces and Riesz factors.

    The stress Riesz matrix depends only on the mesh, the boundary regime and
    mu, so one factor per (N, bc) serves a whole lambda sweep.
    """

    def __init__(
        self,
        solver: Optional[SolverConfig] = None,
        mu: float = 0.5,
        dt: float = 1.0,
        s0: Optional[float] = None,
        jobs: int = 1,
    ) -> None:
        self.solver = solver or SolverConfig()
        self.mu = mu
        self.dt = dt
        self.s0 = s0
        self.jobs = max(1, int(jobs))
        self._contexts: Dict[Tuple[int, BoundaryMode], _MeshContext] = {}
        self._lock = threading.Lock()

    # ------------------------------------------------------------------
    # shared state
    # ------------------------------------------------------------------

    def context(self, n: int, bc: BoundaryMode) -> _MeshContext:
        key = (n, BoundaryMode(bc))
        with self._lock:
            if key not in self._contexts:
                spaces = build_biot_spaces(build_unit_square_mesh(n), key[1])
                factor = factor_sigma_riesz(spaces, ParameterSet(mu=self.mu))
                self._contexts[key] = _MeshContext(spaces, factor)
            return self._contexts[key]

    def parameters(self, point: SweepPoint) -> ParameterSet:
        profile = KappaProfile.LAYERED if point.case == CaseKind.CASE4 else KappaProfile.CONSTANT
        return ParameterSet(
            mu=self.mu,
            lam=point.lam,
            alpha=point.alpha if point.alpha is not None else 1.0,
            kappa=point.kappa if point.kappa is not None else 1.0,
            kappa_profile=profile,
            s0=self.s0,
            dt=self.dt,
        )

    # ------------------------------------------------------------------
    # problems
    # ------------------------------------------------------------------

    def problem(self, point: SweepPoint):
        """Operator, preconditioner and right-hand side of one point."""
        ctx = self.context(point.n, point.bc)
        spaces, params, seed = ctx.spaces, self.parameters(point), self.solver.seed

        if point.case == CaseKind.CASE1:
            free = spaces.stress.free_dofs
            op = assemble_stress_operator(spaces.mesh, spaces.stress, params, basis=spaces.basis)
            op = op[free][:, free].tocsr()
            precond = build_stress_solver(spaces, params, ctx.riesz_factor).apply
            return op, precond, seeded_random_vector(op.shape[0], seed)

        ndisp = spaces.displacement.ndof
        if point.case == CaseKind.CASE2:
            f = seeded_random_vector(ndisp, seed)
            system = assemble_elasticity_system(spaces, params, f=f)
            precond = build_block_precond(
                spaces, params, with_pressure=False, riesz_factor=ctx.riesz_factor
            )
            return system.matrix, precond, system.rhs.data

        loads = seeded_random_vector(ndisp + spaces.pressure.ndof, seed)
        parts = assemble_parts(spaces, params)
        system = assemble_system(spaces, params, f=loads[:ndisp], g=loads[ndisp:], parts=parts)
        precond = build_block_precond(spaces, params, riesz_factor=ctx.riesz_factor, parts=parts)
        return system.matrix, precond, system.rhs.data

    def matrix(self, point: SweepPoint) -> sps.csr_matrix:
        return self.problem(point)[0]

    def solve(self, point: SweepPoint) -> CellResult:
        """Solve one point; non-convergence is recorded, not raised."""
        op, precond, rhs = self.problem(point)
        x0 = seeded_random_vector(len(rhs), self.solver.seed + 1)
        options = dict(
            tol=self.solver.tol,
            maxiter=self.solver.maxiter,
            check_interval=self.solver.residual_check_interval,
            drift_factor=self.solver.drift_factor,
            measure=self.solver.residual_measure,
        )
        if point.case == CaseKind.CASE1:
            try:
                _, report = pcg(op, precond, rhs, x0, **options)
            except NegativeCurvatureError as exc:
                logger.warning("%s: %s", point.key, exc)
                report = exc.report
        else:
            _, report = pminres(op, precond, rhs, x0, **options)

        if not report.converged:
            logger.warning(
                "%s did not converge in %d iterations (residual %.3e)",
                point.key, report.iterations, report.final_residual,
            )
        record = IterationRecord(
            case=point.case,
            bc=point.bc,
            N=point.n,
            **{"lambda": point.lam},
            alpha=point.alpha,
            kappa=point.kappa,
            iterations=report.iterations,
            converged=report.converged,
            final_residual=report.final_residual,
            true_residual=report.true_residual,
        )
        return CellResult(point, record, report)

    def run(
        self,
        points: Sequence[SweepPoint],
        progress: Optional[Callable[[CellResult], None]] = None,
    ) -> List[CellResult]:
        """Solve every point; results keep the order of ``points``."""
        # build contexts up front so that workers only read shared state
        for n, bc in dict.fromkeys((p.n, p.bc) for p in points):
            self.context(n, bc)

        def work(point: SweepPoint) -> CellResult:
            result = self.solve(point)
            if progress is not None:
                progress(result)
            return result

        if self.jobs == 1 or len(points) <= 1:
            return [work(p) for p in points]
        with ThreadPoolExecutor(max_workers=self.jobs) as pool:
            return list(pool.map(work, points))


# =============================================================================
# Sweeps
# =============================================================================


def case_points(
    case: Union[CaseKind, str],
    bc: Union[BoundaryMode, str],
    n_list: Sequence[int],
    lambda_list: Sequence[float],
    alpha_list: Sequence[float] = (),
    kappa_list: Sequence[float] = (),
) -> List[SweepPoint]:
    """Enumerate the points of a sweep in table order.

    Cases 1 and 2 vary (lambda, N); cases 3 and 4 vary (kappa, alpha, lambda, N).
    """
    case, bc = CaseKind(case), BoundaryMode(bc)
    if case in (CaseKind.CASE1, CaseKind.CASE2):
        return [SweepPoint(case, bc, n, lam) for lam in lambda_list for n in n_list]
    return [
        SweepPoint(case, bc, n, lam, alpha, kappa)
        for kappa, alpha, lam, n in itertools.product(kappa_list, alpha_list, lambda_list, n_list)
    ]


def _runner(tol, maxiter, seed, mu, jobs, **kwargs) -> ExperimentRunner:
    solver = SolverConfig(tol=tol, maxiter=maxiter, seed=seed, **kwargs)
    return ExperimentRunner(solver, mu=mu, jobs=jobs)


def run_case1(
    bc_mode: Union[BoundaryMode, str],
    n_list: Sequence[int],
    lambda_list: Sequence[float],
    tol: float = 1e-9,
    seed: int = 0,
    maxiter: int = 500,
    mu: float = 0.5,
    jobs: int = 1,
) -> List[CellResult]:
    """PCG counts for the stress-only problem."""
    points = case_points(CaseKind.CASE1, bc_mode, n_list, lambda_list)
    return _runner(tol, maxiter, seed, mu, jobs).run(points)


def run_case2(
    n_list: Sequence[int],
    lambda_list: Sequence[float],
    tol: float = 1e-9,
    seed: int = 0,
    maxiter: int = 500,
    mu: float = 0.5,
    jobs: int = 1,
    bc_mode: Union[BoundaryMode, str] = BoundaryMode.CLAMPED,
) -> List[CellResult]:
    """Preconditioned MINRES counts for mixed elasticity."""
    points = case_points(CaseKind.CASE2, bc_mode, n_list, lambda_list)
    return _runner(tol, maxiter, seed, mu, jobs).run(points)


def _run_biot(case, n_list, lambda_list, alpha_list, kappa_list, tol, seed, maxiter, mu, jobs, bc_mode):
    points = case_points(case, bc_mode, n_list, lambda_list, alpha_list, kappa_list)
    return _runner(tol, maxiter, seed, mu, jobs).run(points)


def run_case3(
    n_list: Sequence[int],
    lambda_list: Sequence[float],
    alpha_list: Sequence[float],
    kappa_list: Sequence[float],
    tol: float = 1e-9,
    seed: int = 0,
    maxiter: int = 500,
    mu: float = 0.5,
    jobs: int = 1,
    bc_mode: Union[BoundaryMode, str] = BoundaryMode.CLAMPED,
) -> List[CellResult]:
    """Preconditioned MINRES counts for the Biot system with constant kappa."""
    return _run_biot(CaseKind.CASE3, n_list, lambda_list, alpha_list, kappa_list,
                     tol, seed, maxiter, mu, jobs, bc_mode)


def run_case4(
    n_list: Sequence[int],
    lambda_list: Sequence[float],
    alpha_list: Sequence[float],
    kappa_list: Sequence[float],
    tol: float = 1e-9,
    seed: int = 0,
    maxiter: int = 500,
    mu: float = 0.5,
    jobs: int = 1,
    bc_mode: Union[BoundaryMode, str] = BoundaryMode.CLAMPED,
) -> List[CellResult]:
    """As case 3 with kappa in the middle layer and 1 elsewhere."""
    return _run_biot(CaseKind.CASE4, n_list, lambda_list, alpha_list, kappa_list,
                     tol, seed, maxiter, mu, jobs, bc_mode)


def iteration_counts(results: Sequence[CellResult]) -> np.ndarray:
    return np.array([r.record.iterations for r in results], dtype=int)
