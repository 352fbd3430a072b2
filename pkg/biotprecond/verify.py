"""Dense eigen-analysis of the stress inner products and of the full system
on small meshes.

Every check returns measured constants; :func:`run_verification` turns them
into pass/fail :class:`VerificationRecord` rows.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sps

from .assembly import (
    assemble_div,
    assemble_divdiv,
    assemble_m_vector,
    assemble_p0_mass,
    assemble_parts,
    assemble_sigma_aux,
    assemble_sigma_riesz,
    assemble_skw,
    assemble_stress_mass,
    assemble_stress_operator,
    assemble_system,
)
from .config import VerifyConfig
from .exceptions import InvalidArgumentError
from .krylov import seeded_random_vector
from .mesh import build_unit_square_mesh
from .models import BoundaryMode, ParameterSet, VerificationRecord
from .precond import (
    build_rank_one_for,
    build_stress_solver,
    condition_estimate,
    congruence_operator,
    factor_sigma_riesz,
)
from .sparsela import dense_sym_geig
from .spaces import BiotSpaces, build_biot_spaces, interpolate_identity

logger = logging.getLogger(__name__)

LOWER_BOUND_TOL = 1e-10
MAX_DENSE_N = 8
# largest lambda at which the assembled auxiliary matrix is used directly
DENSE_AUX_LAMBDA_MAX = 1e4


# =============================================================================
# Spectral equivalence of the stress inner products
# =============================================================================


@dataclass(frozen=True)
class SpectralRow:
    """Extremes of <tau, tau>_norm / ((A tau, tau) + |div tau|^2) at one lambda."""

    lam: float
    eig_min: float
    eig_max: float
    identity_ratio: Optional[float] = None


@dataclass(frozen=True)
class SpectralTable:
    check: str
    rows: Tuple[SpectralRow, ...]

    @property
    def lower(self) -> float:
        return min(r.eig_min for r in self.rows)

    @property
    def spread(self) -> float:
        """Largest over smallest upper extreme across the sweep."""
        upper = [r.eig_max for r in self.rows]
        return max(upper) / min(upper)

    @property
    def plateau(self) -> float:
        """Relative change of the upper extreme between the two largest lambdas."""
        rows = sorted(self.rows, key=lambda r: r.lam)
        if len(rows) < 2:
            return 0.0
        return abs(rows[-1].eig_max - rows[-2].eig_max) / rows[-1].eig_max

    @property
    def nondecreasing(self) -> bool:
        upper = [r.eig_max for r in sorted(self.rows, key=lambda r: r.lam)]
        return all(b >= a * (1.0 - 1e-8) for a, b in zip(upper, upper[1:]))


def _check_dense_size(n: int) -> None:
    if not 1 <= n <= MAX_DENSE_N:
        raise InvalidArgumentError(
            f"Dense verification supports 1 <= N <= {MAX_DENSE_N}, got {n}", argument="N"
        )


def _free_dense(matrix, free: np.ndarray) -> np.ndarray:
    return matrix[free][:, free].toarray()


def _stress_pencil(spaces: BiotSpaces, params: ParameterSet) -> np.ndarray:
    """(A sigma, tau) + (div sigma, div tau) on the free DOFs."""
    free = spaces.stress.free_dofs
    return _free_dense(
        assemble_stress_operator(spaces.mesh, spaces.stress, params, basis=spaces.basis), free
    )


def _riesz(spaces: BiotSpaces, mu: float) -> np.ndarray:
    params = ParameterSet(mu=mu)
    return _free_dense(
        assemble_sigma_riesz(spaces.mesh, spaces.stress, params, basis=spaces.basis),
        spaces.stress.free_dofs,
    )


def _ratio_extremes(operator: np.ndarray, norm: np.ndarray) -> Tuple[float, float]:
    # nu = eig(operator, norm) keeps the well-conditioned matrix on the right
    nu = dense_sym_geig(operator, norm)
    return 1.0 / nu.max(), 1.0 / nu.min()


def check_spectral_equivalence_nonclamped(
    n: int, lambda_list: Sequence[float], mu: float = 0.5
) -> SpectralTable:
    """Pencil of the plain stress Riesz product under mixed conditions."""
    _check_dense_size(n)
    spaces = build_biot_spaces(build_unit_square_mesh(n), BoundaryMode.MIXED)
    norm = _riesz(spaces, mu)
    rows = []
    for lam in lambda_list:
        lo, hi = _ratio_extremes(_stress_pencil(spaces, ParameterSet(mu=mu, lam=lam)), norm)
        rows.append(SpectralRow(lam, lo, hi))
        logger.debug("nonclamped lambda=%.1e: [%.12g, %.12g]", lam, lo, hi)
    return SpectralTable("spectral_nonclamped", tuple(rows))


def identity_form_ratio(spaces: BiotSpaces, params: ParameterSet) -> float:
    """((A + div div) w, w) over the closed form n|Omega|/(2mu + n lambda)."""
    w = interpolate_identity(spaces.stress, spaces.mesh)
    operator = assemble_stress_operator(spaces.mesh, spaces.stress, params, basis=spaces.basis)
    exact = params.dim * spaces.mesh.domain_area / params.bulk_modulus_sum
    return float(w @ (operator @ w)) / exact


def check_spectral_equivalence_clamped(
    n: int, lambda_list: Sequence[float], mu: float = 0.5
) -> SpectralTable:
    """Pencil of the auxiliary stress product under clamped conditions.

    The auxiliary product and the stress operator both map w to a multiple of
    m, so span{w} and {x : m^T x = 0} decouple. On w the ratio is exactly 1;
    on the complement the auxiliary product equals the plain Riesz product.
    """
    _check_dense_size(n)
    spaces = build_biot_spaces(build_unit_square_mesh(n), BoundaryMode.CLAMPED)
    m = assemble_m_vector(spaces.mesh, spaces.stress, basis=spaces.basis)
    complement = scipy.linalg.null_space(m[None, :])
    norm = complement.T @ _riesz(spaces, mu) @ complement

    rows = []
    for lam in lambda_list:
        params = ParameterSet(mu=mu, lam=lam)
        operator = complement.T @ _stress_pencil(spaces, params) @ complement
        lo, hi = _ratio_extremes(0.5 * (operator + operator.T), 0.5 * (norm + norm.T))
        rows.append(
            SpectralRow(lam, min(lo, 1.0), max(hi, 1.0), identity_form_ratio(spaces, params))
        )
        logger.debug("clamped lambda=%.1e: [%.12g, %.12g]", lam, rows[-1].eig_min, hi)
    return SpectralTable("spectral_clamped", tuple(rows))


def check_plain_norm_clamped(n: int, lam: float, mu: float = 0.5) -> float:
    """Smallest eig((A + div div), B) with the plain Riesz product under
    clamped conditions; it decays like 1/lambda.
    """
    _check_dense_size(n)
    spaces = build_biot_spaces(build_unit_square_mesh(n), BoundaryMode.CLAMPED)
    nu = dense_sym_geig(_stress_pencil(spaces, ParameterSet(mu=mu, lam=lam)), _riesz(spaces, mu))
    return float(nu.min())


# =============================================================================
# Inf-sup constants
# =============================================================================


def infsup_norm_matrix(spaces: BiotSpaces, params: ParameterSet, parts=None) -> np.ndarray:
    """diag(stress norm, pressure block, P0 masses) as a dense matrix."""
    parts = parts or assemble_parts(spaces, params)
    free = spaces.stress.free_dofs
    if spaces.tags.is_clamped:
        stress = assemble_sigma_aux(spaces.mesh, spaces.stress, params, basis=spaces.basis)
        stress = stress[np.ix_(free, free)]
    else:
        stress = _free_dense(
            assemble_sigma_riesz(spaces.mesh, spaces.stress, params, basis=spaces.basis), free
        )
    return scipy.linalg.block_diag(
        stress,
        parts.pressure.toarray(),
        np.diag(assemble_p0_mass(spaces.mesh, spaces.displacement)),
        np.diag(assemble_p0_mass(spaces.mesh, spaces.rotation)),
    )


@dataclass(frozen=True)
class InfSupEstimate:
    beta: float
    upper: float
    point: Dict[str, float] = field(default_factory=dict)


def infsup_estimate(
    n: int, params: ParameterSet, mode: BoundaryMode = BoundaryMode.CLAMPED
) -> InfSupEstimate:
    """Smallest and largest |eig| of the system against its norm matrix."""
    _check_dense_size(n)
    spaces = build_biot_spaces(build_unit_square_mesh(n), mode)
    parts = assemble_parts(spaces, params)
    system = assemble_system(spaces, params, parts=parts)
    ev = np.abs(dense_sym_geig(system.matrix.toarray(), infsup_norm_matrix(spaces, params, parts)))
    point = {"N": float(n), "lambda": params.lam, "alpha": params.alpha, "kappa": params.kappa}
    return InfSupEstimate(float(ev.min()), float(ev.max()), point)


def check_infsup(n: int, params: ParameterSet, mode: BoundaryMode = BoundaryMode.CLAMPED) -> float:
    """beta = smallest singular value of N^-1/2 A N^-1/2."""
    return infsup_estimate(n, params, mode).beta


# =============================================================================
# Elasticity stability
# =============================================================================


@dataclass(frozen=True)
class StabilityEstimate:
    n: int
    worst_case: float
    sampled: float


def check_elasticity_stability(
    n: int,
    mode: BoundaryMode = BoundaryMode.CLAMPED,
    samples: int = 20,
    seed: int = 0,
) -> StabilityEstimate:
    """Constant of the least-norm right inverse of (div, skw).

    For data y = (u, gamma) the stress of least H(div) norm with
    (div tau, v) = (u, v) and (tau, eta) = (gamma, eta) for all test
    functions has norm^2 = y^T M S^-1 M y with S = G H^-1 G^T. The worst case
    is 1/sqrt(lambda_min(S, M)).
    """
    _check_dense_size(n)
    spaces = build_biot_spaces(build_unit_square_mesh(n), mode)
    mesh, free = spaces.mesh, spaces.stress.free_dofs
    G = sps.vstack(
        [
            assemble_div(mesh, spaces.stress, spaces.displacement, basis=spaces.basis)[:, free],
            assemble_skw(mesh, spaces.stress, spaces.rotation, basis=spaces.basis)[:, free],
        ]
    ).toarray()
    H = _free_dense(
        assemble_stress_mass(mesh, spaces.stress, spaces.basis)
        + assemble_divdiv(mesh, spaces.stress, spaces.basis),
        free,
    )
    M = np.concatenate(
        [assemble_p0_mass(mesh, spaces.displacement), assemble_p0_mass(mesh, spaces.rotation)]
    )
    S = G @ scipy.linalg.solve(H, G.T, assume_a="pos")
    S = 0.5 * (S + S.T)
    worst = 1.0 / np.sqrt(dense_sym_geig(S, np.diag(M))[0])

    sampled = 0.0
    for k in range(samples):
        y = seeded_random_vector(len(M), seed + k)
        My = M * y
        ratio = My @ scipy.linalg.solve(S, My, assume_a="pos") / (y @ My)
        sampled = max(sampled, float(np.sqrt(ratio)))
    logger.debug("stability N=%d: worst %.6g, sampled %.6g", n, worst, sampled)
    return StabilityEstimate(n, float(worst), sampled)


# =============================================================================
# Lanczos condition estimates
# =============================================================================


def aux_preconditioner_condition(n: int, lam: float, mu: float = 0.5, iters: int = 80) -> float:
    """K of the clamped stress preconditioner against the auxiliary product.

    Up to DENSE_AUX_LAMBDA_MAX the operator is the assembled matrix; above it
    the matrix-free congruence form V^T B V is used, whose error grows like
    eps / sqrt(1 - rho) rather than eps / (1 - rho).
    """
    spaces = build_biot_spaces(build_unit_square_mesh(n), BoundaryMode.CLAMPED)
    params = ParameterSet(mu=mu, lam=lam)
    factor = factor_sigma_riesz(spaces, params)
    solver = build_stress_solver(spaces, params, factor)
    if lam <= DENSE_AUX_LAMBDA_MAX:
        op = assemble_sigma_aux(spaces.mesh, spaces.stress, params, basis=spaces.basis)
    else:
        riesz = assemble_sigma_riesz(spaces.mesh, spaces.stress, params, basis=spaces.basis)
        op = congruence_operator(riesz, build_rank_one_for(spaces, params))
    return condition_estimate(op, solver.apply, iters=iters).condition


def stress_pair_condition(
    n: int, lam: float, mode: BoundaryMode, mu: float = 0.5, iters: int = 80
) -> float:
    """K of the stress-only operator preconditioned by its Riesz-map block."""
    spaces = build_biot_spaces(build_unit_square_mesh(n), mode)
    params = ParameterSet(mu=mu, lam=lam)
    free = spaces.stress.free_dofs
    op = assemble_stress_operator(spaces.mesh, spaces.stress, params, basis=spaces.basis)
    solver = build_stress_solver(spaces, params)
    return condition_estimate(op[free][:, free], solver.apply, iters=iters).condition


# =============================================================================
# Suite
# =============================================================================


def _record(check: str, measured: float, passed: bool, detail: str = "", **point) -> VerificationRecord:
    record = VerificationRecord(
        check=check, point=point, measured=float(measured), passed=bool(passed), detail=detail
    )
    if not record.passed:
        logger.warning("Check %s failed at %s: measured %.6g", check, point, measured)
    return record


def _spectral_records(table: SpectralTable, n: int, plateau_tol: float) -> List[VerificationRecord]:
    records = [
        _record(f"{table.check}_lower", table.lower, table.lower >= 1.0 - LOWER_BOUND_TOL,
                "smallest ratio over the sweep", N=n),
        _record(f"{table.check}_plateau", table.plateau,
                table.nondecreasing and table.plateau <= plateau_tol,
                "upper extreme saturates in lambda", N=n),
        _record(f"{table.check}_spread", table.spread, True, "reported only", N=n),
    ]
    for row in table.rows:
        records.append(_record(f"{table.check}_upper", row.eig_max, True, "", N=n, **{"lambda": row.lam}))
        if row.identity_ratio is not None:
            # the trace mode of the A-form is resolved to about eps * lambda
            tol = max(1e-10, 1e-13 * (1.0 + row.lam))
            records.append(
                _record(f"{table.check}_identity", row.identity_ratio,
                        abs(row.identity_ratio - 1.0) <= tol, "", N=n, **{"lambda": row.lam})
            )
    return records


def _infsup_records(config: VerifyConfig) -> List[VerificationRecord]:
    records = []
    betas: Dict[int, List[float]] = {}
    for n in config.infsup_n_list:
        for lam in config.infsup_lambda_list:
            for alpha in config.infsup_alpha_list:
                for kappa in config.infsup_kappa_list:
                    params = ParameterSet(mu=config.mu, lam=lam, alpha=alpha, kappa=kappa)
                    est = infsup_estimate(n, params)
                    betas.setdefault(n, []).append(est.beta)
                    records.append(_record("infsup_beta", est.beta, est.beta > 0.0, "", **est.point))
    limit = config.infsup_spread_limit
    for n, values in betas.items():
        spread = max(values) / min(values)
        records.append(_record("infsup_spread", spread, spread <= limit,
                               f"limit {limit:g}", N=n))
    if len(betas) >= 2:
        mins = [min(v) for v in betas.values()]
        ratio = max(mins) / min(mins)
        records.append(_record("infsup_h_robust", ratio, ratio <= limit, f"limit {limit:g}"))
    return records


def run_verification(
    config: Optional[VerifyConfig] = None,
    progress: Optional[Callable[[str], None]] = None,
) -> List[VerificationRecord]:
    """Run every check and return the records in a fixed order."""
    config = config or VerifyConfig()
    n, mu = config.n, config.mu
    notify = progress or (lambda name: logger.info("Running %s", name))
    records: List[VerificationRecord] = []

    notify("spectral_nonclamped")
    table = check_spectral_equivalence_nonclamped(n, config.lambda_list, mu)
    records.extend(_spectral_records(table, n, config.plateau_tol))

    notify("spectral_clamped")
    table = check_spectral_equivalence_clamped(n, config.lambda_list, mu)
    records.extend(_spectral_records(table, n, config.plateau_tol))

    notify("negative_control")
    nu_min = check_plain_norm_clamped(n, config.negative_control_lambda, mu)
    records.append(
        _record("negative_control", nu_min, nu_min < config.negative_control_threshold,
                "plain Riesz product degenerates", N=n, **{"lambda": config.negative_control_lambda})
    )

    notify("infsup")
    records.extend(_infsup_records(config))

    notify("elasticity_stability")
    estimates = [check_elasticity_stability(k, samples=config.stability_samples)
                 for k in config.stability_n_list]
    for est in estimates:
        records.append(_record("stability_worst", est.worst_case, np.isfinite(est.worst_case),
                               "", N=est.n))
        records.append(_record("stability_sampled", est.sampled, est.sampled <= est.worst_case * (1 + 1e-10),
                               "", N=est.n))
    if len(estimates) >= 2:
        worst = [e.worst_case for e in estimates]
        ratio = max(worst) / min(worst)
        records.append(_record("stability_h_robust", ratio, ratio <= 2.0, "limit 2"))

    notify("condition")
    nc = config.condition_n
    for lam in config.lambda_list:
        k_aux = aux_preconditioner_condition(nc, lam, mu, config.lanczos_iters)
        records.append(_record("condition_aux_exact", k_aux, k_aux <= 1.0 + 1e-6, "",
                               N=nc, **{"lambda": lam}))
        k_pair = stress_pair_condition(nc, lam, BoundaryMode.CLAMPED, mu, config.lanczos_iters)
        records.append(_record("condition_stress_clamped", k_pair, k_pair <= config.condition_limit,
                               f"limit {config.condition_limit:g}", N=nc, **{"lambda": lam}))
    return records
