"""Manufactured solutions, error measurement and empirical orders of convergence."""
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
import pandas as pd
from loguru import logger

from models import RigidBodyParams, TodaParams, WaveParams, make_damped_wave, make_rigid_body, make_toda, \
    wave_operators, zero_control
from phsystem import PHSystem
from solver import CpgSolution, eval_solution

BELOW_FLOOR = "below floor"

Trajectory = Callable[[Union[float, np.ndarray]], np.ndarray]


@dataclass(frozen=True)
class ManufacturedCase:
    """A base system and an exact trajectory with its analytic time derivative.

    ``z_exact`` and ``dz_exact`` map a scalar time to a (dim,) vector and an
    array of n times to a (dim, n) batch.
    """

    base: PHSystem
    z_exact: Trajectory
    dz_exact: Trajectory
    name: str = ""

    def derivative_defect(self, times: Sequence[float], h: float = 1e-5) -> float:
        """Max relative gap between dz_exact and central differences of z_exact."""
        t = np.asarray(times, dtype=float)
        fd = (self.z_exact(t + h) - self.z_exact(t - h)) / (2.0 * h)
        exact = self.dz_exact(t)
        return float(np.max(np.abs(fd - exact) / np.maximum(np.abs(exact), 1.0)))


def wrap_manufactured(case: ManufacturedCase) -> PHSystem:
    """Replace B by B_bar(t, .) = M dz(t) - J(eta(z(t))) + R(eta(z(t))); J, R, eta, H untouched.

    The returned system's ``initial_state`` is z_exact(0).
    """
    base = case.base

    def b_bar(t, v):
        z = case.z_exact(t)
        eta = base.eta(z)
        forcing = base.mass_apply(case.dz_exact(t)) - base.j_apply(eta) + base.r_apply(eta)
        if np.ndim(v) == 2 and np.ndim(forcing) == 1:
            forcing = np.repeat(forcing[:, None], np.shape(v)[1], axis=1)
        return forcing

    return base.with_input(b_bar, name=f"{base.name}_manufactured",
                           initial_state=np.asarray(case.z_exact(0.0), dtype=float))


def manufactured_defect(system: PHSystem, case: ManufacturedCase, times: Sequence[float]) -> float:
    """Max over times of |M dz - (J - R)(eta(z)) - B(t, eta(z))|; zero for a wrapped case."""
    t = np.asarray(times, dtype=float)
    z = case.z_exact(t)
    eta = system.eta(z)
    gap = system.mass_apply(case.dz_exact(t)) - system.j_apply(eta) + system.r_apply(eta) - system.b_apply(t, eta)
    return float(np.max(np.abs(gap)))


# ---------------------------------------------------------------------------
# Shipped cases
# ---------------------------------------------------------------------------

def toda_case(params: TodaParams = TodaParams()) -> ManufacturedCase:
    """q_i = sin t, p_i = cos t."""
    n = params.n

    def z_exact(t):
        t = np.asarray(t, dtype=float)
        return np.concatenate([np.multiply.outer(np.ones(n), np.sin(t)),
                               np.multiply.outer(np.ones(n), np.cos(t))], axis=0)

    def dz_exact(t):
        t = np.asarray(t, dtype=float)
        return np.concatenate([np.multiply.outer(np.ones(n), np.cos(t)),
                               np.multiply.outer(np.ones(n), -np.sin(t))], axis=0)

    return ManufacturedCase(make_toda(params, zero_control), z_exact, dz_exact, name="toda")


def rigid_body_case(params: RigidBodyParams = RigidBodyParams()) -> ManufacturedCase:
    """p_1 = sin t, p_2 = sin(2t) cos(t)^2 + 0.5, p_3 = cos t."""

    def z_exact(t):
        t = np.asarray(t, dtype=float)
        return np.stack([np.sin(t), np.sin(2 * t) * np.cos(t) ** 2 + 0.5, np.cos(t)])

    def dz_exact(t):
        t = np.asarray(t, dtype=float)
        dp2 = 2 * np.cos(2 * t) * np.cos(t) ** 2 - 2 * np.sin(2 * t) * np.cos(t) * np.sin(t)
        return np.stack([np.cos(t), dp2, -np.sin(t)])

    return ManufacturedCase(make_rigid_body(params, zero_control), z_exact, dz_exact, name="rigid_body")


def wave_case(params: WaveParams = WaveParams()) -> ManufacturedCase:
    """rho = v = sin(t) sin(x), sampled at cell midpoints (rho) and grid points (v)."""
    ops = wave_operators(params)
    profile = np.concatenate([np.sin(ops.midpoints), np.sin(ops.nodes)])

    def z_exact(t):
        return np.multiply.outer(profile, np.sin(np.asarray(t, dtype=float)))

    def dz_exact(t):
        return np.multiply.outer(profile, np.cos(np.asarray(t, dtype=float)))

    return ManufacturedCase(make_damped_wave(params, zero_control, zero_control), z_exact, dz_exact, name="wave")


# ---------------------------------------------------------------------------
# Errors and rates
# ---------------------------------------------------------------------------

def _norms(errors: np.ndarray, mass: Optional[np.ndarray]) -> np.ndarray:
    if mass is None:
        return np.linalg.norm(errors, axis=0)
    return np.sqrt(np.maximum(np.sum(errors * (mass @ errors), axis=0), 0.0))


def _resolve_mass(norm: str, mass: Optional[np.ndarray], dim: int) -> Optional[np.ndarray]:
    if norm == "plain":
        return None
    if norm == "mass":
        return np.eye(dim) if mass is None else mass
    raise ValueError(f"unknown norm {norm!r}, expected 'plain' or 'mass'")


def sampling_grid(t0: float, t_end: float, tau_ref: float) -> np.ndarray:
    """Uniform times t0, t0 + tau_ref, ..., always ending with t_end."""
    if not tau_ref > 0:
        raise ValueError("sampling step must be positive")
    count = int(math.floor((t_end - t0) / tau_ref + 1e-9))
    times = t0 + tau_ref * np.arange(count + 1)
    times = times[times < t_end - 1e-9 * tau_ref]
    return np.append(times, t_end)


def linf_error(sol: CpgSolution, z_exact: Trajectory, tau_ref: float, norm: str = "plain",
               mass: Optional[np.ndarray] = None) -> float:
    """max_t |z_exact(t) - z_tau(t)| on a uniform grid of step tau_ref (including t_m).

    ``norm='mass'`` measures sqrt(e^T M e) with the given mass matrix.
    """
    points = sol.partition.points
    times = sampling_grid(points[0], points[-1], tau_ref)
    errors = z_exact(times) - eval_solution(sol, times)
    return float(np.max(_norms(errors, _resolve_mass(norm, mass, sol.dim))))


def nodal_error(sol: CpgSolution, z_exact: Trajectory, norm: str = "plain",
                mass: Optional[np.ndarray] = None) -> float:
    """max_i |z_exact(t_i) - z_tau(t_i)| over the grid points."""
    errors = z_exact(np.asarray(sol.partition.points)) - sol.nodal_values()
    return float(np.max(_norms(errors, _resolve_mass(norm, mass, sol.dim))))


def eoc(taus: Sequence[float], errors: Sequence[float], floor: float = 0.0) -> list:
    """Pairwise rates log(e_{i-1}/e_i)/log(tau_{i-1}/tau_i).

    The first entry is None; pairs with an error at or below ``floor`` give
    the BELOW_FLOOR marker instead of a rate.
    """
    if len(taus) != len(errors) or len(taus) < 2:
        raise ValueError("need at least two (tau, error) pairs of equal length")
    rates: list = [None]
    for i in range(1, len(taus)):
        e_prev, e_cur = errors[i - 1], errors[i]
        if not (e_prev > floor and e_cur > floor):
            rates.append(BELOW_FLOOR)
            continue
        rates.append(math.log(e_prev / e_cur) / math.log(taus[i - 1] / taus[i]))
    return rates


@dataclass
class ConvergenceRecord:
    tau: float
    err_inf: Optional[float]
    err_nodal: Optional[float]
    eoc_inf: Union[float, str, None] = None
    eoc_nodal: Union[float, str, None] = None


def convergence_table(taus: Sequence[float], err_inf: Sequence[Optional[float]],
                      err_nodal: Sequence[Optional[float]], floor: float = 0.0) -> list[ConvergenceRecord]:
    """Rows ordered by decreasing tau with pairwise rates."""
    order = sorted(range(len(taus)), key=lambda i: -taus[i])
    taus = [taus[i] for i in order]
    err_inf = [err_inf[i] for i in order]
    err_nodal = [err_nodal[i] for i in order]
    if any(b >= a for a, b in zip(taus, taus[1:])):
        raise ValueError("step sizes must be distinct")

    def rates(errors):
        if len(taus) < 2 or any(e is None for e in errors):
            return [None] * len(taus)
        return eoc(taus, errors, floor)

    rate_inf, rate_nodal = rates(err_inf), rates(err_nodal)
    records = [ConvergenceRecord(tau, ei, en, ri, rn)
               for tau, ei, en, ri, rn in zip(taus, err_inf, err_nodal, rate_inf, rate_nodal)]
    if any(r == BELOW_FLOOR for r in rate_inf + rate_nodal):
        logger.warning("Some convergence rates are limited by the error floor")
    return records


def records_to_frame(records: Sequence[ConvergenceRecord]) -> pd.DataFrame:
    """Columns tau, err_inf, eoc_inf, err_nodal, eoc_nodal."""
    return pd.DataFrame(
        [{"tau": r.tau, "err_inf": r.err_inf, "eoc_inf": r.eoc_inf,
          "err_nodal": r.err_nodal, "eoc_nodal": r.eoc_nodal} for r in records],
        columns=["tau", "err_inf", "eoc_inf", "err_nodal", "eoc_nodal"],
    )
