"""Quadrature rules on the reference triangle and on edges."""

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgumentError


@dataclass(frozen=True)
class TriangleRule:
    """Barycentric points and weights normalized to sum to one."""

    degree: int
    barycentric: np.ndarray
    weights: np.ndarray

    @property
    def npoints(self) -> int:
        return len(self.weights)


def _symmetric_orbit(a: float) -> np.ndarray:
    b = 1.0 - 2.0 * a
    return np.array([[b, a, a], [a, b, a], [a, a, b]])


def _degree2() -> TriangleRule:
    bary = _symmetric_orbit(1.0 / 6.0)
    return TriangleRule(2, bary, np.full(3, 1.0 / 3.0))


def _degree4() -> TriangleRule:
    # Dunavant, 6 points
    a1, w1 = 0.44594849091596488632, 0.22338158967801146570
    a2, w2 = 0.09157621350977074346, 0.10995174365532186764
    bary = np.vstack([_symmetric_orbit(a1), _symmetric_orbit(a2)])
    weights = np.array([w1, w1, w1, w2, w2, w2])
    return TriangleRule(4, bary, weights)


_RULES = {2: _degree2, 4: _degree4}


def triangle_rule(degree: int = 4) -> TriangleRule:
    """Return the triangle rule of the given polynomial exactness.

    Args:
        degree: 2 (three points) or 4 (six points).

    Raises:
        InvalidArgumentError: If no rule of that degree is tabulated.
    """
    try:
        return _RULES[degree]()
    except KeyError:
        raise InvalidArgumentError(
            f"No triangle rule of degree {degree}; available: {sorted(_RULES)}",
            argument="degree",
        ) from None


def edge_rule(npoints: int = 2):
    """Gauss-Legendre points and weights on [0, 1], exact to degree 2 * npoints - 1."""
    points, weights = np.polynomial.legendre.leggauss(npoints)
    return 0.5 * (points + 1.0), 0.5 * weights
