"""cPG time stepping.

On every subinterval the unknowns are the coefficients d (shape (dim, k)) of
dz/dt in the orthonormal degree-(k-1) basis. z on the subinterval is rebuilt by
antidifferentiation from the left endpoint value, so continuity and the initial
condition hold by construction. Testing with e_a L_j turns the local equation
into

    (M d)[a, j] = Q_i[ e_a L_j . (J - R + B)(Pi~ eta(z)) ],

whose left side is exact by orthonormality.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from loguru import logger

from basis import SegmentPoly, antiderivative_coefficients, orthonormal_legendre_values
from exceptions import DomainError, NonConvergenceError, SingularJacobianError
from phsystem import PHSystem, SolverConfig, rhs
from projection import evaluate_at_nodes
from utils import sup_norm

ResidualJacobian = Callable[[np.ndarray, np.ndarray, tuple[float, float]], np.ndarray]


@dataclass(frozen=True, eq=False)
class TimePartition:
    """Grid t_0 < t_1 < ... < t_m."""

    points: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim != 1 or points.size < 2:
            raise ValueError("a partition needs at least two grid points")
        if not np.all(np.diff(points) > 0):
            raise ValueError("grid points must be strictly increasing")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @classmethod
    def uniform(cls, t0: float, t_end: float, m: int) -> "TimePartition":
        if m < 1:
            raise ValueError(f"need at least one step, got m={m}")
        return cls(np.linspace(t0, t_end, m + 1))

    @classmethod
    def from_step(cls, t_end: float, tau: float, t0: float = 0.0) -> "TimePartition":
        """Uniform grid with m = round((t_end - t0)/tau) steps."""
        m = int(round((t_end - t0) / tau))
        return cls.uniform(t0, t_end, max(m, 1))

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def tau(self) -> float:
        return float(np.max(self.widths))

    @property
    def m(self) -> int:
        return self.points.size - 1

    def interval(self, i: int) -> tuple[float, float]:
        """The i-th subinterval, i = 0..m-1."""
        return float(self.points[i]), float(self.points[i + 1])


@dataclass(eq=False)
class CpgSolution:
    partition: TimePartition
    segments: list[SegmentPoly]
    newton_iters: list[int] = field(default_factory=list)
    residual_norms: list[float] = field(default_factory=list)
    config: Optional[SolverConfig] = None
    system_name: str = ""

    @property
    def dim(self) -> int:
        return self.segments[0].dim

    def __call__(self, t) -> np.ndarray:
        return eval_solution(self, t)

    def nodal_values(self) -> np.ndarray:
        """z at t_0..t_m (right endpoint of each segment after the first); shape (dim, m+1)."""
        first = self.segments[0].values_at_unit(np.array([0.0]))
        rest = [seg.values_at_unit(np.array([1.0])) for seg in self.segments]
        return np.hstack([first] + rest)

    def continuity_defect(self) -> float:
        """Max relative jump at interior grid points."""
        defect = 0.0
        for left, right in zip(self.segments[:-1], self.segments[1:]):
            zl = left.values_at_unit(np.array([1.0]))[:, 0]
            zr = right.values_at_unit(np.array([0.0]))[:, 0]
            defect = max(defect, sup_norm(zl - zr) / max(1.0, sup_norm(zl)))
        return defect

    def initial_defect(self, z0: np.ndarray) -> float:
        z_start = self.segments[0].values_at_unit(np.array([0.0]))[:, 0]
        return sup_norm(z_start - np.asarray(z0)) / max(1.0, sup_norm(z0))


class _LocalProblem:
    """Residual of one subinterval with all basis tables precomputed."""

    def __init__(self, system: PHSystem, interval: tuple[float, float], z_left: np.ndarray,
                 config: SolverConfig):
        self.system = system
        self.a, self.b = interval
        if not self.b > self.a:
            raise ValueError(f"degenerate interval [{self.a}, {self.b}]")
        self.tau = self.b - self.a
        self.z_left = np.asarray(z_left, dtype=float)
        self.config = config
        k = config.k
        rule_q = config.rule_q
        self.times_q = rule_q.map_nodes(self.a, self.b)
        sqrt_tau = np.sqrt(self.tau)
        # z at the Q nodes (degree k) and test functions L_j at the Q nodes (degree k-1)
        self.z_at_q = orthonormal_legendre_values(k, rule_q.nodes) / sqrt_tau
        self.test_at_q = orthonormal_legendre_values(k - 1, rule_q.nodes) * rule_q.weights * sqrt_tau
        if config.use_projection:
            rule_pi = config.rule_pi
            self.times_pi = rule_pi.map_nodes(self.a, self.b)
            self.z_at_pi = orthonormal_legendre_values(k, rule_pi.nodes) / sqrt_tau
            proj = orthonormal_legendre_values(k - 1, rule_pi.nodes)
            self.project = (proj * rule_pi.weights).T * sqrt_tau
            self.v_at_q = orthonormal_legendre_values(k - 1, rule_q.nodes) / sqrt_tau

    def z_coeffs(self, d: np.ndarray) -> np.ndarray:
        return antiderivative_coefficients(d, self.z_left, self.tau)

    def v_samples(self, d: np.ndarray) -> np.ndarray:
        """(Pi~) eta(z) at the Q nodes; shape (dim, s_q)."""
        coeffs = self.z_coeffs(d)
        if self.config.use_projection:
            eta_pi = evaluate_at_nodes(self.system.eta, self.times_pi, coeffs @ self.z_at_pi, "eta")
            return (eta_pi @ self.project) @ self.v_at_q
        return evaluate_at_nodes(self.system.eta, self.times_q, coeffs @ self.z_at_q, "eta")

    def residual(self, d: np.ndarray) -> np.ndarray:
        v = self.v_samples(d)
        try:
            forcing = np.asarray(rhs(self.system, self.times_q, v), dtype=float)
        except DomainError:
            raise
        except (ArithmeticError, ValueError) as exc:
            for col, t in enumerate(self.times_q):
                try:
                    rhs(self.system, self.times_q[col:col + 1], v[:, col:col + 1])
                except (ArithmeticError, ValueError):
                    raise DomainError(f"right-hand side failed: {exc}", t=float(t)) from exc
            raise DomainError(f"right-hand side failed: {exc}") from exc
        bad = ~np.all(np.isfinite(forcing), axis=0)
        if np.any(bad):
            raise DomainError("right-hand side returned non-finite values",
                              t=float(self.times_q[np.argmax(bad)]))
        lhs = self.system.mass_apply(d)
        return (lhs - forcing @ self.test_at_q.T).ravel()


def assemble_local_residual(system: PHSystem, interval: tuple[float, float], z_left, d,
                            config: SolverConfig) -> np.ndarray:
    """Residual of the local cPG equations for derivative coefficients d (dim, k); length dim*k.

    Entry a*k + j is (M d)[a, j] - Q_i[e_a L_j . rhs(., v)] with v = Pi~ eta(z).
    """
    d = np.asarray(d, dtype=float).reshape(system.dim, config.k)
    return _LocalProblem(system, interval, z_left, config).residual(d)


@dataclass
class StepResult:
    d: np.ndarray
    iterations: int
    residual_norm: float


def _fd_jacobian(problem: _LocalProblem, d: np.ndarray, r0: np.ndarray, rel_step: float) -> np.ndarray:
    x = d.ravel()
    jac = np.empty((r0.size, x.size))
    for c in range(x.size):
        step = rel_step * (1.0 + abs(x[c]))
        shifted = x.copy()
        shifted[c] += step
        jac[:, c] = (problem.residual(shifted.reshape(d.shape)) - r0) / step
    return jac


def _newton_correction(problem: _LocalProblem, d: np.ndarray, r: np.ndarray, config: SolverConfig,
                       jacobian: Optional[ResidualJacobian], interval: tuple[float, float]) -> np.ndarray:
    if config.jacobian_mode == "user":
        jac = np.asarray(jacobian(d, problem.z_left, interval), dtype=float)
    else:
        jac = _fd_jacobian(problem, d, r, config.fd_jacobian_step)
    if not np.all(np.isfinite(jac)):
        raise SingularJacobianError(f"non-finite Jacobian on [{interval[0]}, {interval[1]}]")
    try:
        delta = np.linalg.solve(jac, -r)
    except np.linalg.LinAlgError as exc:
        raise SingularJacobianError(f"singular Jacobian on [{interval[0]}, {interval[1]}]") from exc
    return d + delta.reshape(d.shape)


def newton_step_solve(system: PHSystem, interval: tuple[float, float], z_left, config: SolverConfig,
                      d0: Optional[np.ndarray] = None,
                      jacobian: Optional[ResidualJacobian] = None) -> StepResult:
    """Solve the local equations by Newton's method.

    Once the residual meets ``newton_tol`` one more correction is applied, which
    takes the iterate from the tolerance down to round-off. ``iterations``
    counts the corrections including that last one, so a starting guess that
    already solves the equations takes one iteration.

    Args:
        d0: starting coefficients; by default zeros (the constant trajectory),
            or ones with ``config.newton_start == "ones"``
        jacobian: callable (d, z_left, interval) -> (dim*k, dim*k) residual
            Jacobian, required when ``config.jacobian_mode == "user"``

    Raises:
        NonConvergenceError: budget exhausted; carries the best iterate
        SingularJacobianError: LU factorization failed
        DomainError: eta, J, R or B failed at a quadrature node
    """
    problem = _LocalProblem(system, interval, z_left, config)
    shape = (system.dim, config.k)
    if d0 is not None:
        d = np.array(d0, dtype=float).reshape(shape)
    elif config.newton_start == "ones":
        d = np.ones(shape)
    else:
        d = np.zeros(shape)
    if config.jacobian_mode == "user" and jacobian is None:
        raise SingularJacobianError("jacobian_mode 'user' requires a residual Jacobian callable")

    best_d, best_norm = d, np.inf
    for iteration in range(1, config.newton_max_iter + 1):
        r = problem.residual(d)
        norm = sup_norm(r)
        if norm < best_norm:
            best_d, best_norm = d, norm
        if norm <= config.newton_tol:
            polished = _newton_correction(problem, d, r, config, jacobian, interval)
            polished_norm = sup_norm(problem.residual(polished))
            if polished_norm <= norm:
                return StepResult(d=polished, iterations=iteration, residual_norm=polished_norm)
            return StepResult(d=d, iterations=iteration, residual_norm=norm)
        if iteration == config.newton_max_iter:
            break
        d = _newton_correction(problem, d, r, config, jacobian, interval)

    raise NonConvergenceError(
        f"Newton did not reach {config.newton_tol:g} within {config.newton_max_iter} iterations "
        f"on [{interval[0]}, {interval[1]}] (residual {best_norm:.3e})",
        d=best_d,
        residual_norm=best_norm,
        iterations=config.newton_max_iter,
    )


def integrate(system: PHSystem, z0, partition: TimePartition, config: SolverConfig,
              jacobian: Optional[ResidualJacobian] = None) -> CpgSolution:
    """March the cPG scheme over the partition.

    The first step starts Newton from ``config.newton_start`` (d = 0 unless
    set to ones), later steps from the previous step's d. On non-convergence
    the error carries the step index and the partial trajectory.
    """
    z_left = np.array(z0, dtype=float)
    if z_left.shape != (system.dim,) or not np.all(np.isfinite(z_left)):
        raise ValueError(f"initial state must be a finite vector of length {system.dim}")

    logger.info(f"Integrating {system.name}: k={config.k}, s_q={config.s_q}, s_pi={config.s_pi}, "
                f"m={partition.m}, tau={partition.tau:.4g}")
    solution = CpgSolution(partition=partition, segments=[], config=config, system_name=system.name)
    d_prev = None
    for i in range(partition.m):
        interval = partition.interval(i)
        try:
            step = newton_step_solve(system, interval, z_left, config, d0=d_prev, jacobian=jacobian)
        except NonConvergenceError as exc:
            exc.step_index = i
            exc.partial = solution
            logger.error(f"Step {i} on {interval} failed: {exc}")
            raise
        segment = SegmentPoly(interval[0], interval[1],
                              antiderivative_coefficients(step.d, z_left, interval[1] - interval[0]))
        solution.segments.append(segment)
        solution.newton_iters.append(step.iterations)
        solution.residual_norms.append(step.residual_norm)
        logger.debug(f"step {i}: {step.iterations} Newton iterations, residual {step.residual_norm:.2e}")
        z_left = segment.values_at_unit(np.array([1.0]))[:, 0]
        d_prev = step.d

    logger.info(f"Finished {system.name}: max Newton iterations {max(solution.newton_iters)}")
    return solution


def eval_solution(sol: CpgSolution, t) -> np.ndarray:
    """Dense output; grid points t_i (i >= 1) resolve to the segment on their left."""
    points = sol.partition.points
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < points[0]) or np.any(times > points[-1]):
        raise ValueError(f"time outside [{points[0]}, {points[-1]}]")
    index = np.clip(np.searchsorted(points, times, side="left") - 1, 0, sol.partition.m - 1)
    values = np.empty((sol.dim, times.size))
    for i in np.unique(index):
        mask = index == i
        seg = sol.segments[i]
        x = np.clip((times[mask] - seg.a) / seg.tau, 0.0, 1.0)
        values[:, mask] = seg.values_at_unit(x)
    return values[:, 0] if np.ndim(t) == 0 else values
