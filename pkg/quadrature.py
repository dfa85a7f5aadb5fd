"""Gauss–Legendre rules on the unit interval.

Rules are generated once per node count and cached; the node and weight arrays
are read-only so one rule can be shared by any number of concurrent solves.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from loguru import logger

from config import MAX_GAUSS_NODES

_NEWTON_SWEEPS = 100


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """An s-point rule on [0, 1] with strictly increasing nodes and positive weights."""

    s: int
    nodes: np.ndarray
    weights: np.ndarray

    def map_nodes(self, a: float, b: float) -> np.ndarray:
        return map_nodes(self, a, b)

    def apply(self, a: float, b: float, samples) -> float:
        return apply(self, a, b, samples)


def _legendre_with_derivative(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """P_n(x) and P_n'(x) on [-1, 1] by the three-term recurrence."""
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    for j in range(1, n + 1):
        p_prev, p = p, ((2 * j - 1) * x * p - (j - 1) * p_prev) / j
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


@lru_cache(maxsize=None)
def gauss_legendre_unit(s: int) -> QuadratureRule:
    """The s-point Gauss–Legendre rule on [0, 1], exact for degree 2s-1.

    Nodes are the roots of P_s found by Newton iteration from Chebyshev-type
    initial guesses; only the non-negative half is computed and mirrored, so
    the rule is exactly symmetric about 1/2.

    Args:
        s (int): number of nodes, 1 <= s <= MAX_GAUSS_NODES

    Returns:
        QuadratureRule: the cached rule
    """
    if not isinstance(s, (int, np.integer)) or isinstance(s, bool):
        raise ValueError(f"node count must be an integer, got {s!r}")
    if s < 1 or s > MAX_GAUSS_NODES:
        raise ValueError(f"node count must lie in 1..{MAX_GAUSS_NODES}, got {s}")
    s = int(s)

    half = (s + 1) // 2
    i = np.arange(1, half + 1)
    x = np.cos(np.pi * (i - 0.25) / (s + 0.5))
    for _ in range(_NEWTON_SWEEPS):
        p, dp = _legendre_with_derivative(s, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) <= 2.0 * np.finfo(float).eps:
            break
    else:
        logger.warning(f"Gauss–Legendre Newton sweep for s={s} hit the iteration cap")
    if s % 2 == 1:
        x[-1] = 0.0
    _, dp = _legendre_with_derivative(s, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)

    # x is decreasing and non-negative: left half first, then its mirror image
    nodes = np.empty(s)
    weights = np.empty(s)
    nodes[:half] = 0.5 - 0.5 * x
    weights[:half] = 0.5 * w
    nodes[s - half:] = (0.5 + 0.5 * x)[::-1]
    weights[s - half:] = (0.5 * w)[::-1]

    nodes.setflags(write=False)
    weights.setflags(write=False)
    logger.debug(f"Built Gauss–Legendre rule with s={s}")
    return QuadratureRule(s=s, nodes=nodes, weights=weights)


def map_nodes(rule: QuadratureRule, a: float, b: float) -> np.ndarray:
    """Affine image a + (b-a)*node of the unit nodes on [a, b]."""
    if not b > a:
        raise ValueError(f"degenerate interval [{a}, {b}]")
    return a + (b - a) * rule.nodes


def apply(rule: QuadratureRule, a: float, b: float, samples) -> float:
    """(b-a) * sum_j w_j g(zeta_j) for samples g(zeta_j) at the mapped nodes.

    ``samples`` may carry leading axes; the node axis is the last one, and the
    result then has the leading shape.
    """
    if not b > a:
        raise ValueError(f"degenerate interval [{a}, {b}]")
    values = np.asarray(samples, dtype=float)
    if values.shape[-1:] != (rule.s,):
        raise ValueError(f"expected {rule.s} samples on the last axis, got shape {values.shape}")
    result = (b - a) * (values @ rule.weights)
    return float(result) if np.ndim(result) == 0 else result
