"""Energy accounting for finished cPG solutions.

The discrete balance of the scheme reads, on every step,

    H(z(t_i)) - H(z(t_{i-1})) = Q_i[ -<R(v), v> + <B(., v), v> ],   v = Pi~ eta(z),

exactly when the projection quadrature integrates eta(z) against degree-(k-1)
polynomials exactly. E_i measures the defect relative to the largest increment.
"""
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import pandas as pd
from loguru import logger

from config import ENERGY_FLOOR_FACTOR
from exceptions import ConfigMismatchError, DomainError
from phsystem import PHSystem, SolverConfig
from projection import evaluate_at_nodes, project_eta_of_segment
from solver import CpgSolution, eval_solution

_COMPARED_FIELDS = ("k", "s_q", "s_pi", "use_projection")


@dataclass(eq=False)
class EnergyReport:
    times: np.ndarray           # t_0..t_m
    hamiltonian: np.ndarray     # H at t_0..t_m
    dissipation: np.ndarray     # per step, Q_i[<R(v), v>]
    supply: np.ndarray          # per step, Q_i[<B(., v), v>]
    balance_error: np.ndarray   # per step, E_i
    denominator: float

    @property
    def max_error(self) -> float:
        return float(np.max(self.balance_error))

    def to_frame(self) -> pd.DataFrame:
        """Columns i, t_i, H, dissipation, supply, E for steps i = 1..m."""
        m = self.balance_error.size
        return pd.DataFrame({
            "i": np.arange(1, m + 1),
            "t_i": self.times[1:],
            "H": self.hamiltonian[1:],
            "dissipation": self.dissipation,
            "supply": self.supply,
            "E": self.balance_error,
        })


def _check_config(sol: CpgSolution, config: SolverConfig) -> None:
    if sol.config is None:
        return
    for name in _COMPARED_FIELDS:
        if getattr(sol.config, name) != getattr(config, name):
            raise ConfigMismatchError(
                f"solution was computed with {name}={getattr(sol.config, name)!r}, "
                f"report requested with {getattr(config, name)!r}",
                field=f"solver.{name}",
            )


def energy_balance_report(system: PHSystem, sol: CpgSolution, config: SolverConfig) -> EnergyReport:
    """Per-step Hamiltonian, dissipation, supply and relative balance error E_i.

    Denominator: max(max_j |H_j - H_{j-1}|, 1e3 * eps * (1 + max_j |H_j|)).
    """
    _check_config(sol, config)
    rule_q = config.rule_q
    nodal = sol.nodal_values()
    ham = np.asarray(system.hamiltonian(nodal), dtype=float)
    if not np.all(np.isfinite(ham)):
        raise DomainError("non-finite Hamiltonian along the solution")

    m = len(sol.segments)
    dissipation = np.empty(m)
    supply = np.empty(m)
    for i, seg in enumerate(sol.segments):
        times = rule_q.map_nodes(seg.a, seg.b)
        if config.use_projection:
            v = project_eta_of_segment(seg, system, config.rule_pi).values_at_unit(rule_q.nodes)
        else:
            v = evaluate_at_nodes(system.eta, times, seg.values_at_unit(rule_q.nodes), "eta")
        r_pairing = np.sum(np.asarray(system.r_apply(v)) * v, axis=0)
        b_pairing = np.sum(np.asarray(system.b_apply(times, v)) * v, axis=0)
        dissipation[i] = seg.tau * (r_pairing @ rule_q.weights)
        supply[i] = seg.tau * (b_pairing @ rule_q.weights)

    increments = np.diff(ham)
    floor = ENERGY_FLOOR_FACTOR * np.finfo(float).eps * (1.0 + np.max(np.abs(ham)))
    denominator = max(float(np.max(np.abs(increments))), floor)
    balance_error = np.abs(increments - (supply - dissipation)) / denominator

    report = EnergyReport(
        times=np.array(sol.partition.points),
        hamiltonian=ham,
        dissipation=dissipation,
        supply=supply,
        balance_error=balance_error,
        denominator=denominator,
    )
    logger.info(f"Energy audit of {system.name}: max E = {report.max_error:.3e}")
    return report


def hamiltonian_trace(system: PHSystem, sol: CpgSolution, sample_times: Sequence[float]) -> list[tuple[float, float]]:
    """(t, H(z_tau(t))) for the given times inside [t_0, t_m]."""
    times = np.asarray(sample_times, dtype=float)
    states = eval_solution(sol, times)
    values = np.atleast_1d(np.asarray(system.hamiltonian(states), dtype=float))
    return [(float(t), float(h)) for t, h in zip(times, values)]


def power_balance_residual(system: PHSystem, z_fn: Callable[[float], np.ndarray], t: float,
                           h_fd: float = 1e-5) -> float:
    """|dH(z)/dt + <R(eta), eta> - <B(t, eta), eta>| at t, derivative by central differences."""
    h_plus = float(system.hamiltonian(np.asarray(z_fn(t + h_fd), dtype=float)))
    h_minus = float(system.hamiltonian(np.asarray(z_fn(t - h_fd), dtype=float)))
    eta = np.asarray(system.eta(np.asarray(z_fn(t), dtype=float)), dtype=float)
    dissipated = float(np.dot(system.r_apply(eta), eta))
    supplied = float(np.dot(system.b_apply(t, eta), eta))
    value = (h_plus - h_minus) / (2.0 * h_fd) + dissipated - supplied
    if not np.isfinite(value):
        raise DomainError("non-finite power balance", t=t)
    return abs(value)
