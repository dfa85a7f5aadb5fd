"""The port-Hamiltonian system contract, solver settings and conformance checks.

Every system callable works on a single state of shape (dim,) or on a batch of
states stacked as columns, shape (dim, n). ``hamiltonian`` then returns a
float or an (n,) array; ``b_apply`` accepts a scalar time or an (n,) array of
times matching the batch.
"""
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property
from typing import Any, Callable, Optional

import numpy as np
from loguru import logger

from config import NEWTON_MAX_ITER, NEWTON_TOL
from exceptions import ConfigError, DomainError
from quadrature import QuadratureRule, gauss_legendre_unit

_JACOBIAN_MODES = ("finite_difference", "user")
_NEWTON_STARTS = ("zero", "ones")


@dataclass(frozen=True, eq=False)
class PHSystem:
    """dz/dt = J(eta(z)) - R(eta(z)) + B(t, eta(z)), with M dz/dt on the left if a mass matrix is set.

    ``eta`` is M^-1 grad H (plain gradient when ``mass`` is None).
    """

    name: str
    dim: int
    hamiltonian: Callable
    eta: Callable
    j_apply: Callable
    r_apply: Callable
    b_apply: Callable
    mass: Optional[np.ndarray] = None
    initial_state: Optional[np.ndarray] = None
    params: Any = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"system dimension must be positive, got {self.dim}")
        if self.mass is not None:
            mass = np.array(self.mass, dtype=float)
            if mass.shape != (self.dim, self.dim):
                raise ValueError(f"mass matrix must be {self.dim}x{self.dim}, got {mass.shape}")
            if np.max(np.abs(mass - mass.T)) > 1e-13 * max(1.0, np.max(np.abs(mass))):
                raise ValueError("mass matrix must be symmetric")
            try:
                np.linalg.cholesky(mass)
            except np.linalg.LinAlgError as exc:
                raise ValueError("mass matrix must be positive definite") from exc
            mass.setflags(write=False)
            object.__setattr__(self, "mass", mass)

    def mass_matrix(self) -> np.ndarray:
        return np.eye(self.dim) if self.mass is None else self.mass

    def mass_apply(self, x: np.ndarray) -> np.ndarray:
        return x if self.mass is None else self.mass @ x

    def with_input(self, b_apply: Callable, name: Optional[str] = None,
                   initial_state: Optional[np.ndarray] = None) -> "PHSystem":
        """Same J, R, eta and H with a different supply map."""
        return replace(
            self,
            b_apply=b_apply,
            name=name or self.name,
            initial_state=self.initial_state if initial_state is None else initial_state,
        )


@dataclass(frozen=True)
class SolverConfig:
    """Degree, quadrature sizes and Newton settings of one cPG run.

    ``s_q`` defaults to k and ``s_pi`` to max(k, 3). ``fd_jacobian_step`` is
    the relative forward-difference step; the step for unknown x_c is
    fd_jacobian_step * (1 + |x_c|).
    ``newton_start`` is the first-step Newton guess for d: "zero" (the
    constant trajectory) or "ones".
    """

    k: int
    s_q: Optional[int] = None
    s_pi: Optional[int] = None
    newton_tol: float = NEWTON_TOL
    newton_max_iter: int = NEWTON_MAX_ITER
    fd_jacobian_step: float = float(np.sqrt(np.finfo(float).eps))
    jacobian_mode: str = "finite_difference"
    use_projection: bool = True
    newton_start: str = "zero"

    def __post_init__(self):
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise ConfigError(f"must be an integer >= 1, got {self.k!r}", field="solver.k")
        if self.s_q is None:
            object.__setattr__(self, "s_q", int(self.k))
        if self.s_pi is None:
            object.__setattr__(self, "s_pi", max(int(self.k), 3))
        for name in ("s_q", "s_pi"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"must be an integer >= 1, got {value!r}", field=f"solver.{name}")
        if not self.newton_tol > 0:
            raise ConfigError(f"must be positive, got {self.newton_tol!r}", field="solver.newton_tol")
        if self.newton_max_iter < 1:
            raise ConfigError(f"must be >= 1, got {self.newton_max_iter!r}", field="solver.newton_max_iter")
        if not self.fd_jacobian_step > 0:
            raise ConfigError("must be positive", field="solver.fd_jacobian_step")
        if self.jacobian_mode not in _JACOBIAN_MODES:
            raise ConfigError(f"must be one of {_JACOBIAN_MODES}, got {self.jacobian_mode!r}",
                              field="solver.jacobian_mode")
        if self.newton_start not in _NEWTON_STARTS:
            raise ConfigError(f"must be one of {_NEWTON_STARTS}, got {self.newton_start!r}",
                              field="solver.newton_start")

    @cached_property
    def rule_q(self) -> QuadratureRule:
        return gauss_legendre_unit(self.s_q)

    @cached_property
    def rule_pi(self) -> QuadratureRule:
        return gauss_legendre_unit(self.s_pi)

    def to_dict(self) -> dict:
        return asdict(self)


def rhs(system: PHSystem, t, v: np.ndarray) -> np.ndarray:
    """J(v) - R(v) + B(t, v)."""
    return system.j_apply(v) - system.r_apply(v) + system.b_apply(t, v)


def _finite_hamiltonian(system: PHSystem, states: np.ndarray) -> np.ndarray:
    values = np.asarray(system.hamiltonian(states), dtype=float)
    if not np.all(np.isfinite(values)):
        raise DomainError(f"non-finite Hamiltonian values for system {system.name}")
    return values


def check_gradient(system: PHSystem, z: np.ndarray, h: float = 1e-6) -> float:
    """Max componentwise deviation between M eta(z) and central differences of H.

    Each component is measured relative to max(|(M eta)_i|, 1), so stationary
    points are compared against an absolute floor.
    """
    z = np.asarray(z, dtype=float)
    shifts = h * np.eye(system.dim)
    upper = _finite_hamiltonian(system, z[:, None] + shifts)
    lower = _finite_hamiltonian(system, z[:, None] - shifts)
    fd_grad = (upper - lower) / (2.0 * h)
    grad = system.mass_apply(np.asarray(system.eta(z), dtype=float))
    return float(np.max(np.abs(fd_grad - grad) / np.maximum(np.abs(grad), 1.0)))


@dataclass
class ConformanceReport:
    name: str
    probes: int
    skew_defect: float
    dissipation_min: float
    gradient_deviation: float
    mass_ok: bool
    details: dict = field(default_factory=dict)

    def passed(self, skew_tol: float = 1e-12, dissipation_tol: float = 1e-12,
               gradient_tol: float = 1e-6) -> bool:
        return (
            self.skew_defect <= skew_tol
            and self.dissipation_min >= -dissipation_tol
            and self.gradient_deviation <= gradient_tol
            and self.mass_ok
        )


def run_conformance(system: PHSystem, n_probes: int = 100, seed: int = 0, scale: float = 1.0,
                    h: float = 1e-5) -> ConformanceReport:
    """Probe conservativity of J, dissipativity of R, the gradient identity and the mass matrix.

    * skew_defect: max |<J(v), v>| / (1 + |J(v)| |v|)
    * dissipation_min: min <R(v), v> / (1 + |v|^2)
    * gradient_deviation: max of ``check_gradient`` over the probes
    """
    rng = np.random.default_rng(seed)
    v = scale * rng.standard_normal((system.dim, n_probes))

    jv = np.asarray(system.j_apply(v))
    skew = np.abs(np.sum(jv * v, axis=0)) / (1.0 + np.linalg.norm(jv, axis=0) * np.linalg.norm(v, axis=0))
    rv = np.asarray(system.r_apply(v))
    dissipation = np.sum(rv * v, axis=0) / (1.0 + np.sum(v * v, axis=0))

    z = scale * rng.standard_normal((system.dim, n_probes))
    gradient = max(check_gradient(system, z[:, i], h) for i in range(n_probes))

    mass_ok = True
    if system.mass is not None:
        try:
            np.linalg.cholesky(system.mass)
            mass_ok = bool(np.max(np.abs(system.mass - system.mass.T)) <= 1e-13 * np.max(np.abs(system.mass)))
        except np.linalg.LinAlgError:
            mass_ok = False

    report = ConformanceReport(
        name=system.name,
        probes=n_probes,
        skew_defect=float(np.max(skew)),
        dissipation_min=float(np.min(dissipation)),
        gradient_deviation=float(gradient),
        mass_ok=mass_ok,
    )
    logger.debug(f"Conformance of {system.name}: {report}")
    return report
