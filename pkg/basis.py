"""L2-orthonormal shifted Legendre basis on a time subinterval.

On [a, b] with tau = b - a the basis functions are

    L_j(t) = tau**-0.5 * Lhat_j((t - a) / tau),   Lhat_j(x) = sqrt(2j+1) P_j(2x - 1),

so that the integral of L_j * L_l over [a, b] is the Kronecker delta.
Differentiation and antidifferentiation act on coefficients through small
banded matrices that depend on the interval only through a power of tau.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from config import ENDPOINT_TOL_EPS
from quadrature import gauss_legendre_unit

_EPS = np.finfo(float).eps


def orthonormal_legendre_values(k: int, points) -> np.ndarray:
    """Values Lhat_j(x_l) for j = 0..k at points in [0, 1]; shape (k+1, n)."""
    if k < 0:
        raise ValueError(f"degree must be non-negative, got {k}")
    x = np.atleast_1d(np.asarray(points, dtype=float))
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("points must lie in [0, 1]")
    u = 2.0 * x - 1.0
    values = np.empty((k + 1, x.size))
    values[0] = 1.0
    if k >= 1:
        values[1] = u
    for j in range(1, k):
        values[j + 1] = ((2 * j + 1) * u * values[j] - j * values[j - 1]) / (j + 1)
    values *= np.sqrt(2.0 * np.arange(k + 1) + 1.0)[:, None]
    return values


@lru_cache(maxsize=None)
def _unit_derivative_matrix(k: int) -> np.ndarray:
    """(k, k+1) map of orthonormal coefficients to those of the x-derivative on [0, 1]."""
    mat = np.zeros((max(k, 1), k + 1))
    for j in range(1, k + 1):
        for l in range(j - 1, -1, -2):
            mat[l, j] = 2.0 * np.sqrt((2 * j + 1) * (2 * l + 1))
    mat.setflags(write=False)
    return mat


@lru_cache(maxsize=None)
def _unit_antiderivative_matrix(k: int) -> np.ndarray:
    """(k+1, k) map of degree-(k-1) coefficients to those of the antiderivative vanishing at 0."""
    mat = np.zeros((k + 1, k))
    for l in range(k):
        mat[l + 1, l] = 1.0 / (2.0 * np.sqrt((2 * l + 1) * (2 * l + 3)))
        if l == 0:
            mat[0, 0] = 0.5
        else:
            mat[l - 1, l] = -1.0 / (2.0 * np.sqrt((2 * l + 1) * (2 * l - 1)))
    mat.setflags(write=False)
    return mat


def _clenshaw(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Sum_j coeffs[:, j] * Lhat_j(x) by the Clenshaw recurrence; shape (dim, n)."""
    k = coeffs.shape[1] - 1
    a = coeffs * np.sqrt(2.0 * np.arange(k + 1) + 1.0)
    u = 2.0 * x - 1.0
    b1 = np.zeros((coeffs.shape[0], x.size))
    b2 = np.zeros_like(b1)
    for j in range(k, 0, -1):
        b1, b2 = a[:, j:j + 1] + ((2 * j + 1) / (j + 1)) * u * b1 - ((j + 1) / (j + 2)) * b2, b1
    return a[:, 0:1] + u * b1 - 0.5 * b2


@dataclass(frozen=True, eq=False)
class SegmentPoly:
    """A vector polynomial on [a, b] in the orthonormal basis.

    ``coeffs`` has shape (dim, degree+1); column j multiplies L_j.
    """

    a: float
    b: float
    coeffs: np.ndarray

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError(f"degenerate interval [{self.a}, {self.b}]")
        coeffs = np.array(self.coeffs, dtype=float, ndmin=2)
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    @property
    def tau(self) -> float:
        return self.b - self.a

    @property
    def interval(self) -> tuple[float, float]:
        return (self.a, self.b)

    def unit_coordinates(self, t) -> np.ndarray:
        """(t - a)/tau with endpoint slack of a few eps * tau, clipped to [0, 1]."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        slack = ENDPOINT_TOL_EPS * _EPS * self.tau
        if np.any(t < self.a - slack) or np.any(t > self.b + slack):
            raise ValueError(f"time outside segment [{self.a}, {self.b}]")
        return np.clip((t - self.a) / self.tau, 0.0, 1.0)

    def values_at_unit(self, x: np.ndarray) -> np.ndarray:
        """Values at unit coordinates x in [0, 1]; shape (dim, n)."""
        return _clenshaw(self.coeffs, np.asarray(x, dtype=float)) / np.sqrt(self.tau)

    def __call__(self, t) -> np.ndarray:
        return eval_segment(self, t)


def eval_segment(p: SegmentPoly, t) -> np.ndarray:
    """Evaluate at a scalar time (vector of length dim) or an array of times (dim, n)."""
    scalar = np.ndim(t) == 0
    values = p.values_at_unit(p.unit_coordinates(t))
    return values[:, 0] if scalar else values


def derivative_segment(p: SegmentPoly) -> SegmentPoly:
    """Exact time derivative; the zero segment of degree 0 for constant input."""
    if p.degree == 0:
        return SegmentPoly(p.a, p.b, np.zeros((p.dim, 1)))
    mat = _unit_derivative_matrix(p.degree)
    return SegmentPoly(p.a, p.b, p.coeffs @ mat.T / p.tau)


def antiderivative_from_left(d: SegmentPoly, z_left) -> SegmentPoly:
    """The degree-(k) segment q with q' = d and q(a) = z_left, d of degree k-1."""
    k = d.degree + 1
    z_left = np.asarray(z_left, dtype=float)
    if z_left.shape != (d.dim,):
        raise ValueError(f"left value must have shape ({d.dim},), got {z_left.shape}")
    coeffs = d.coeffs @ _unit_antiderivative_matrix(k).T * d.tau
    coeffs[:, 0] += z_left * np.sqrt(d.tau)
    return SegmentPoly(d.a, d.b, coeffs)


def antiderivative_coefficients(d: np.ndarray, z_left: np.ndarray, tau: float) -> np.ndarray:
    """Coefficient form of ``antiderivative_from_left`` used in the Newton loop."""
    k = d.shape[1]
    coeffs = d @ _unit_antiderivative_matrix(k).T * tau
    coeffs[:, 0] += z_left * np.sqrt(tau)
    return coeffs


def segment_from_function(fn, a: float, b: float, degree: int, n_nodes: Optional[int] = None) -> SegmentPoly:
    """Orthonormal expansion of ``fn`` (vectorised over an array of times) by Gauss quadrature.

    Exact whenever fn is a polynomial of degree <= ``degree`` and
    n_nodes >= degree + 1 (the default).
    """
    rule = gauss_legendre_unit(n_nodes or degree + 1)
    tau = b - a
    samples = np.atleast_2d(np.asarray(fn(a + tau * rule.nodes), dtype=float))
    basis = orthonormal_legendre_values(degree, rule.nodes)
    coeffs = np.sqrt(tau) * (samples * rule.weights) @ basis.T
    return SegmentPoly(a, b, coeffs)
