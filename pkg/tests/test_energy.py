import numpy as np
import pytest

from conftest import linear_system
from energy import energy_balance_report, hamiltonian_trace, power_balance_residual
from exceptions import ConfigMismatchError
from manufactured import rigid_body_case, toda_case, wrap_manufactured
from models import (RigidBodyParams, TodaParams, WaveParams, make_damped_wave, make_rigid_body, make_toda,
                    one_minus_sin, wave_reference_initial_state, zero_control)
from phsystem import SolverConfig
from solver import TimePartition, integrate

AUDIT = TimePartition.from_step(5.0, 1e-2)


def _report(system, z0, cfg, partition=AUDIT):
    sol = integrate(system, z0, partition, cfg)
    return sol, energy_balance_report(system, sol, cfg)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_rigid_body_balance_to_machine_precision(k):
    system = make_rigid_body(RigidBodyParams())
    cfg = SolverConfig(k=k, s_q=k, s_pi=k)
    _, report = _report(system, np.array([0.0, 0.5, 1.0]), cfg)
    assert report.max_error <= 1e-12
    assert np.all(report.dissipation == 0.0)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_toda_balance(k):
    cfg = SolverConfig(k=k, s_q=k, s_pi=max(k, 3))
    _, report = _report(make_toda(TodaParams()), np.zeros(10), cfg)
    assert report.max_error <= 1e-10
    assert np.min(report.dissipation) >= -1e-12


def test_toda_balance_breaks_with_too_few_projection_nodes():
    cfg = SolverConfig(k=1, s_q=1, s_pi=1)
    _, report = _report(make_toda(TodaParams()), np.zeros(10), cfg)
    assert report.max_error >= 1e-8


@pytest.mark.slow
@pytest.mark.parametrize("nu", [0.0, 1.0])
@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_wave_balance(nu, k):
    params = WaveParams(nu=nu)
    system = make_damped_wave(params, one_minus_sin, one_minus_sin)
    cfg = SolverConfig(k=k, s_q=k, s_pi=2 * k)
    _, report = _report(system, wave_reference_initial_state(params), cfg)
    assert report.max_error <= 1e-10


def test_toda_energy_decreases_without_input():
    system = make_toda(TodaParams(), zero_control)
    z0 = np.linspace(-0.5, 0.5, 10)
    sol = integrate(system, z0, TimePartition.from_step(3.0, 0.05), SolverConfig(k=2))
    h = system.hamiltonian(sol.nodal_values())
    assert np.all(np.diff(h) <= 1e-12)


def test_report_frame_layout():
    system = make_rigid_body(RigidBodyParams())
    cfg = SolverConfig(k=2)
    _, report = _report(system, np.array([0.0, 0.5, 1.0]), cfg, TimePartition.from_step(1.0, 0.25))
    frame = report.to_frame()
    assert list(frame.columns) == ["i", "t_i", "H", "dissipation", "supply", "E"]
    assert frame["i"].tolist() == [1, 2, 3, 4]
    assert frame["t_i"].iloc[-1] == pytest.approx(1.0)


def test_zero_dynamics_hits_the_floor():
    system = linear_system(np.zeros((2, 2)))
    cfg = SolverConfig(k=2)
    _, report = _report(system, np.array([1.0, 2.0]), cfg, TimePartition.from_step(1.0, 0.25))
    np.testing.assert_allclose(report.hamiltonian, 2.5, rtol=1e-15)
    floor = 1e3 * np.finfo(float).eps * (1 + 2.5)
    assert report.denominator == pytest.approx(floor)
    assert report.max_error <= 1e-2


def test_mismatched_config_is_rejected():
    system = make_rigid_body(RigidBodyParams())
    sol = integrate(system, np.array([0.0, 0.5, 1.0]), TimePartition.from_step(1.0, 0.5), SolverConfig(k=2))
    with pytest.raises(ConfigMismatchError) as info:
        energy_balance_report(system, sol, SolverConfig(k=2, s_pi=5))
    assert info.value.field == "solver.s_pi"


def test_hamiltonian_trace():
    system = make_rigid_body(RigidBodyParams(), zero_control)
    z0 = np.array([0.0, 0.5, 1.0])
    sol = integrate(system, z0, TimePartition.from_step(1.0, 0.25), SolverConfig(k=1))
    trace = hamiltonian_trace(system, sol, [0.0, 0.5, 1.0])
    assert [t for t, _ in trace] == [0.0, 0.5, 1.0]
    assert all(h == pytest.approx(0.625, rel=1e-12) for _, h in trace)


def test_power_balance_of_manufactured_solutions():
    for case in (toda_case(), rigid_body_case()):
        system = wrap_manufactured(case)
        assert power_balance_residual(system, case.z_exact, 1.0, h_fd=1e-5) <= 1e-6


def test_power_balance_at_equilibrium():
    system = make_rigid_body(RigidBodyParams(), zero_control)
    z_star = np.array([0.0, 0.0, 1.0])
    assert power_balance_residual(system, lambda t: z_star, 0.3) <= 1e-8
