"""Data models for the biotprecond package."""

from enum import Enum
from typing import Dict, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .exceptions import ParameterError


class BoundaryMode(str, Enum):
    """Elasticity boundary regime."""

    CLAMPED = "clamped"
    MIXED = "mixed"


class SpaceKind(str, Enum):
    """Discrete space enumeration."""

    STRESS = "stress"
    DISPLACEMENT = "displacement"
    ROTATION = "rotation"
    PRESSURE = "pressure"


class KappaProfile(str, Enum):
    """Spatial profile of the hydraulic conductivity."""

    CONSTANT = "constant"
    LAYERED = "layered"


class CaseKind(str, Enum):
    """Experiment case enumeration."""

    CASE1 = "case1"
    CASE2 = "case2"
    CASE3 = "case3"
    CASE4 = "case4"


class TableFormat(str, Enum):
    """Output table format."""

    CSV = "csv"
    MARKDOWN = "markdown"


class ResidualMeasure(str, Enum):
    """Quantity compared against the Krylov tolerance.

    SQUARED stops on (B r_k, r_k) / (B r_0, r_0); NORM stops on its square root.
    """

    SQUARED = "squared"
    NORM = "norm"

    def of(self, ratio: float) -> float:
        """Map a preconditioned residual norm ratio onto this measure."""
        return ratio * ratio if self is ResidualMeasure.SQUARED else ratio


class ParameterSet(BaseModel):
    """Material and flow parameters of the stationary Biot system.

    ``lam`` is exposed under the alias ``lambda`` for files and dictionaries.
    ``lam = 0`` is accepted for the elasticity forms; anything needing the
    storage coefficient then requires an explicit ``s0``.
    """

    model_config = ConfigDict(frozen=True, populate_by_name=True, allow_inf_nan=False)

    mu: float = Field(0.5, gt=0.0, description="Shear modulus")
    lam: float = Field(1.0, ge=0.0, alias="lambda", description="Lame parameter")
    alpha: float = Field(1.0, gt=0.0, le=1.0, description="Biot-Willis constant")
    kappa: float = Field(1.0, gt=0.0, le=1.0, description="Hydraulic conductivity")
    kappa_profile: KappaProfile = Field(
        KappaProfile.CONSTANT, description="Constant or layered conductivity"
    )
    s0: Optional[float] = Field(
        None, gt=0.0, description="Storage coefficient, alpha^2/lambda when unset"
    )
    dt: float = Field(1.0, gt=0.0, description="Time step folded into kappa")
    dim: int = Field(2, ge=2, le=2, description="Spatial dimension")

    @property
    def bulk_modulus_sum(self) -> float:
        """2*mu + n*lambda."""
        return 2.0 * self.mu + self.dim * self.lam

    @property
    def rho(self) -> float:
        return self.dim * self.lam / self.bulk_modulus_sum

    @property
    def one_minus_rho(self) -> float:
        # evaluated directly, 1 - rho cancels for large lambda
        return 2.0 * self.mu / self.bulk_modulus_sum

    @property
    def trace_weight(self) -> float:
        """lambda / (2*mu + n*lambda), the trace coefficient of the A-form."""
        return self.lam / self.bulk_modulus_sum

    @property
    def coupling_weight(self) -> float:
        """alpha / (2*mu + n*lambda), the coefficient of K."""
        return self.alpha / self.bulk_modulus_sum

    @property
    def storage(self) -> float:
        """Storage coefficient s0."""
        if self.s0 is not None:
            return self.s0
        if self.lam == 0.0:
            raise ParameterError(
                "s0 = alpha^2/lambda is undefined at lambda = 0; set s0 explicitly",
                parameter="s0",
            )
        return self.alpha**2 / self.lam

    @property
    def pressure_mass_weight(self) -> float:
        """C = s0 + n*alpha^2 / (2*mu + n*lambda)."""
        return self.storage + self.dim * self.alpha**2 / self.bulk_modulus_sum

    def conductivity(self, points: np.ndarray) -> np.ndarray:
        """Evaluate kappa*dt at an array of points with trailing dimension 2."""
        points = np.asarray(points, dtype=float)
        values = np.full(points.shape[:-1], self.kappa)
        if self.kappa_profile == KappaProfile.LAYERED:
            y = points[..., 1]
            values = np.where((y > 0.25) & (y < 0.75), self.kappa, 1.0)
        return values * self.dt


class IterationRecord(BaseModel):
    """One cell of an iteration-count table."""

    model_config = ConfigDict(populate_by_name=True)

    case: CaseKind
    bc: BoundaryMode
    n: int = Field(..., alias="N", ge=1)
    lam: float = Field(..., alias="lambda")
    alpha: Optional[float] = None
    kappa: Optional[float] = None
    iterations: int = Field(..., ge=0)
    converged: bool
    final_residual: float
    true_residual: Optional[float] = None


class VerificationRecord(BaseModel):
    """One measured constant of the verification suite."""

    check: str = Field(..., description="Name of the check")
    point: Dict[str, float] = Field(default_factory=dict)
    measured: float
    passed: bool
    detail: str = ""
