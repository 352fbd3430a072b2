"""Preconditioned conjugate gradients and minimal residual iterations.

Both methods track the relative preconditioned residual
sqrt((B r_k, r_k) / (B r_0, r_0)) and stop once the chosen measure of it
(the squared ratio by default) falls below the tolerance. The recurrence is
cross-checked against the true residual at a fixed interval, and a solve only
counts as converged when the true residual also meets the tolerance within
the drift factor.
"""

import logging
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.sparse as sps
from pydantic import BaseModel, Field

from .exceptions import (
    DimensionMismatchError,
    InvalidArgumentError,
    NegativeCurvatureError,
    NotPositiveDefiniteError,
)
from .models import ResidualMeasure

logger = logging.getLogger(__name__)

Matvec = Callable[[np.ndarray], np.ndarray]


class KrylovReport(BaseModel):
    """Outcome of one Krylov solve."""

    method: str
    iterations: int = 0
    residual_history: List[float] = Field(default_factory=lambda: [1.0])
    converged: bool = False
    tolerance: float
    measure: ResidualMeasure = ResidualMeasure.SQUARED
    true_residual: Optional[float] = None

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1]

    def reached(self, ratio: float, factor: float = 1.0) -> bool:
        """Whether a residual norm ratio meets factor * tolerance under the measure."""
        return self.measure.of(ratio) <= factor * self.tolerance

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")

    @classmethod
    def from_dict(cls, data: dict) -> "KrylovReport":
        return cls.model_validate(data)


def as_matvec(obj) -> Matvec:
    """Turn a matrix, operator, preconditioner or callable into x -> y.

    ``None`` stands for the identity.
    """
    if obj is None:
        return lambda x: np.array(x, dtype=float)
    if hasattr(obj, "matvec"):
        return lambda x: np.asarray(obj.matvec(x), dtype=float).ravel()
    if sps.issparse(obj) or isinstance(obj, np.ndarray):
        return lambda x: np.asarray(obj @ x, dtype=float).ravel()
    if callable(obj):
        return lambda x: np.asarray(obj(x), dtype=float).ravel()
    raise InvalidArgumentError(f"Cannot apply object of type {type(obj).__name__}", argument="op")


def seeded_random_vector(ndof: int, seed: int) -> np.ndarray:
    """Deterministic vector with uniform(-1, 1) entries."""
    if ndof < 0:
        raise InvalidArgumentError(f"Vector length must be non-negative, got {ndof}", argument="ndof")
    return np.random.default_rng(seed).uniform(-1.0, 1.0, ndof)


def _setup(op, precond, rhs, x0) -> Tuple[Matvec, Matvec, np.ndarray, np.ndarray]:
    rhs = np.asarray(rhs, dtype=float).ravel()
    n = len(rhs)
    shape = getattr(op, "shape", None)
    if shape is not None and tuple(shape) != (n, n):
        raise DimensionMismatchError(
            f"Operator of shape {tuple(shape)} with right-hand side of length {n}",
            expected=(n, n),
            actual=tuple(shape),
        )
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float).ravel()
    if x.shape != (n,):
        raise DimensionMismatchError("Initial guess has the wrong length", expected=n, actual=x.shape)
    return as_matvec(op), as_matvec(precond), rhs, x


def _precond_norm2(apply_precond: Matvec, r: np.ndarray) -> float:
    value = float(r @ apply_precond(r))
    if value < 0.0:
        raise NotPositiveDefiniteError("Preconditioner is not positive definite", value=value)
    return value


def _true_residual(apply_op, apply_precond, rhs, x, norm0_2) -> float:
    r = rhs - apply_op(x)
    return float(np.sqrt(max(_precond_norm2(apply_precond, r), 0.0) / norm0_2))


def _finish(report: KrylovReport, true_residual: float, drift_factor: float) -> KrylovReport:
    report.true_residual = true_residual
    if report.converged and not report.reached(true_residual, drift_factor):
        report.converged = False
        logger.warning(
            "%s: true residual %.3e drifted from recurrence residual %.3e; not converged",
            report.method, true_residual, report.final_residual,
        )
    logger.info(
        "%s %s after %d iterations, residual %.3e",
        report.method,
        "converged" if report.converged else "stopped",
        report.iterations,
        report.final_residual,
    )
    return report


def pcg(
    op,
    precond,
    rhs: np.ndarray,
    x0: Optional[np.ndarray] = None,
    tol: float = 1e-9,
    maxiter: int = 500,
    check_interval: int = 25,
    drift_factor: float = 10.0,
    measure: ResidualMeasure = ResidualMeasure.SQUARED,
) -> Tuple[np.ndarray, KrylovReport]:
    """Preconditioned conjugate gradients for SPD operators.

    Raises:
        NegativeCurvatureError: If p^T A p <= 0, carrying the partial report.
        NotPositiveDefiniteError: If the preconditioner is not SPD.
    """
    apply_op, apply_precond, rhs, x = _setup(op, precond, rhs, x0)
    report = KrylovReport(method="pcg", tolerance=tol, measure=ResidualMeasure(measure))

    r = rhs - apply_op(x)
    z = apply_precond(r)
    rz = float(r @ z)
    if rz < 0.0:
        raise NotPositiveDefiniteError("Preconditioner is not positive definite", value=rz)
    norm0_2 = rz
    if norm0_2 == 0.0:
        report.converged = True
        return x, _finish(report, 0.0, drift_factor)

    p = z.copy()
    for k in range(1, maxiter + 1):
        q = apply_op(p)
        curvature = float(p @ q)
        if curvature <= 0.0:
            report.iterations = k - 1
            raise NegativeCurvatureError(
                f"Non-positive curvature {curvature:.3e} at iteration {k}",
                report=report,
                value=curvature,
            )
        alpha = rz / curvature
        x += alpha * p
        r -= alpha * q
        z = apply_precond(r)
        rz_next = float(r @ z)
        report.iterations = k
        report.residual_history.append(float(np.sqrt(max(rz_next, 0.0) / norm0_2)))
        if k % check_interval == 0:
            report.true_residual = _true_residual(apply_op, apply_precond, rhs, x, norm0_2)
            logger.debug("pcg %d: recurrence %.3e, true %.3e",
                         k, report.final_residual, report.true_residual)
        if report.reached(report.final_residual):
            report.converged = True
            break
        p = z + (rz_next / rz) * p
        rz = rz_next

    return x, _finish(
        report, _true_residual(apply_op, apply_precond, rhs, x, norm0_2), drift_factor
    )


def pminres(
    op,
    precond,
    rhs: np.ndarray,
    x0: Optional[np.ndarray] = None,
    tol: float = 1e-9,
    maxiter: int = 500,
    check_interval: int = 25,
    drift_factor: float = 10.0,
    measure: ResidualMeasure = ResidualMeasure.SQUARED,
) -> Tuple[np.ndarray, KrylovReport]:
    """Preconditioned MINRES for symmetric, possibly indefinite operators.

    Lanczos runs in the preconditioner inner product; the recurrence value
    phibar is the preconditioned residual norm, so the history never
    increases.

    Raises:
        NotPositiveDefiniteError: If the preconditioner is not SPD.
    """
    apply_op, apply_precond, rhs, x = _setup(op, precond, rhs, x0)
    report = KrylovReport(method="pminres", tolerance=tol, measure=ResidualMeasure(measure))
    n = len(rhs)

    r1 = rhs - apply_op(x)
    y = apply_precond(r1)
    beta1_2 = float(r1 @ y)
    if beta1_2 < 0.0:
        raise NotPositiveDefiniteError("Preconditioner is not positive definite", value=beta1_2)
    if beta1_2 == 0.0:
        report.converged = True
        return x, _finish(report, 0.0, drift_factor)

    beta1 = np.sqrt(beta1_2)
    r2 = r1.copy()
    old_beta, beta = 0.0, beta1
    dbar = epsilon = 0.0
    phibar = beta1
    cs, sn = -1.0, 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    tiny = np.finfo(float).eps

    for k in range(1, maxiter + 1):
        v = y / beta
        y = apply_op(v)
        if k >= 2:
            y = y - (beta / old_beta) * r1
        alpha = float(v @ y)
        y = y - (alpha / beta) * r2
        r1, r2 = r2, y
        y = apply_precond(r2)
        old_beta = beta
        beta_2 = float(r2 @ y)
        if beta_2 < 0.0:
            raise NotPositiveDefiniteError("Preconditioner is not positive definite", value=beta_2)
        beta = np.sqrt(beta_2)

        # apply the previous rotation, then build the next one
        old_epsilon = epsilon
        delta = cs * dbar + sn * alpha
        gbar = sn * dbar - cs * alpha
        epsilon = sn * beta
        dbar = -cs * beta
        gamma = max(np.hypot(gbar, beta), tiny)
        cs, sn = gbar / gamma, beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1, w2 = w2, w
        w = (v - old_epsilon * w1 - delta * w2) / gamma
        x = x + phi * w

        report.iterations = k
        report.residual_history.append(float(phibar / beta1))
        if k % check_interval == 0:
            report.true_residual = _true_residual(apply_op, apply_precond, rhs, x, beta1_2)
            logger.debug("pminres %d: recurrence %.3e, true %.3e",
                         k, report.final_residual, report.true_residual)
        if report.reached(report.final_residual):
            report.converged = True
            break
        if beta == 0.0:
            # invariant Krylov subspace without convergence
            break

    return x, _finish(
        report, _true_residual(apply_op, apply_precond, rhs, x, beta1_2), drift_factor
    )
