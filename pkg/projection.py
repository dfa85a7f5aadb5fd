"""Quadrature-approximated local L2 projection onto degree-(k-1) polynomials."""
import numpy as np

from basis import SegmentPoly, orthonormal_legendre_values
from exceptions import DomainError
from quadrature import QuadratureRule


def project_sampled(a: float, b: float, target_degree: int, rule: QuadratureRule,
                    samples) -> SegmentPoly:
    """Project sampled values f(zeta_l) onto P_{target_degree}([a, b]).

    Coefficient j is the quadrature approximation (b-a) sum_l w_l f(zeta_l) L_j(zeta_l)
    of the integral of f * L_j; exact when the product is a polynomial of degree
    at most 2s-1.

    Args:
        a, b: the subinterval
        target_degree: degree of the image space, >= 0
        rule: unit rule whose mapped nodes the samples were taken at
        samples: array of shape (dim, s)
    """
    if target_degree < 0:
        raise ValueError(f"target degree must be non-negative, got {target_degree}")
    values = np.atleast_2d(np.asarray(samples, dtype=float))
    if values.shape[1] != rule.s:
        raise ValueError(f"expected samples of shape (dim, {rule.s}), got {values.shape}")
    basis = orthonormal_legendre_values(target_degree, rule.nodes)
    coeffs = np.sqrt(b - a) * (values * rule.weights) @ basis.T
    return SegmentPoly(a, b, coeffs)


def sample_eta(z_seg: SegmentPoly, system, rule: QuadratureRule) -> np.ndarray:
    """eta(z_seg) at the mapped nodes of ``rule``; shape (dim, s).

    Failures and non-finite values are reported as DomainError tagged with the
    first offending node.
    """
    times = rule.map_nodes(z_seg.a, z_seg.b)
    states = z_seg.values_at_unit(rule.nodes)
    return evaluate_at_nodes(system.eta, times, states, "eta")


def evaluate_at_nodes(fn, times: np.ndarray, states: np.ndarray, what: str) -> np.ndarray:
    """Apply a batched state map column-wise and locate failures by node."""
    try:
        values = np.asarray(fn(states), dtype=float)
    except DomainError:
        raise
    except (ArithmeticError, ValueError) as exc:
        for col, t in enumerate(times):
            try:
                fn(states[:, col])
            except (ArithmeticError, ValueError):
                raise DomainError(f"{what} failed: {exc}", t=float(t)) from exc
        raise DomainError(f"{what} failed: {exc}") from exc
    bad = ~np.all(np.isfinite(values), axis=0)
    if np.any(bad):
        t = float(times[np.argmax(bad)])
        raise DomainError(f"{what} returned non-finite values", t=t)
    return values


def project_eta_of_segment(z_seg: SegmentPoly, system, rule_pi: QuadratureRule) -> SegmentPoly:
    """Pi~ eta(z_seg): eta sampled at the s_Pi nodes, projected to degree k-1."""
    if z_seg.degree < 1:
        raise ValueError("projection of eta needs a segment of degree >= 1")
    samples = sample_eta(z_seg, system, rule_pi)
    return project_sampled(z_seg.a, z_seg.b, z_seg.degree - 1, rule_pi, samples)
