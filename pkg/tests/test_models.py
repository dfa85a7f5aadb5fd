import numpy as np
import pytest
from numpy.testing import assert_allclose

from models import (RigidBodyParams, TodaParams, WaveParams, friction_action, friction_matrix, make_damped_wave,
                    make_rigid_body, make_toda, psi, wave_grid_state, wave_operators, wave_reference_initial_state)
from phsystem import check_gradient


def test_toda_hamiltonian_at_rest():
    system = make_toda(TodaParams(n=5))
    # exp(0) springs plus exp(q_N) minus N
    assert system.hamiltonian(np.zeros(10)) == pytest.approx(4.0 + 1.0 - 5.0)
    assert system.dim == 10


def test_toda_eta_matches_finite_differences(rng):
    system = make_toda(TodaParams())
    for _ in range(100):
        assert check_gradient(system, rng.standard_normal(10), h=1e-5) <= 1e-6


def test_toda_input_and_damping():
    system = make_toda(TodaParams(n=3, gamma=[0.1, 0.2, 0.3]))
    v = np.arange(1.0, 7.0)
    assert_allclose(system.r_apply(v), [0, 0, 0, 0.4, 1.0, 1.8])
    b = system.b_apply(np.pi / 4, v)
    assert_allclose(b, [0, 0, 0, 1.0, 0, 0], atol=1e-15)
    batch = system.b_apply(np.array([0.0, np.pi / 4]), np.zeros((6, 2)))
    assert batch.shape == (6, 2)
    with pytest.raises(ValueError):
        TodaParams(n=2, gamma=-1.0)


def test_toda_batches_agree_with_single_states(rng):
    system = make_toda(TodaParams())
    z = rng.standard_normal((10, 4))
    assert_allclose(system.hamiltonian(z), [system.hamiltonian(z[:, i]) for i in range(4)])
    assert_allclose(system.eta(z), np.column_stack([system.eta(z[:, i]) for i in range(4)]))


def test_rigid_body_structure(rng):
    system = make_rigid_body(RigidBodyParams(inertias=(1.0, 2.0, 4.0), axis=(1.0, 0.0, 0.0)))
    v = rng.standard_normal((3, 100))
    assert np.max(np.abs(np.sum(system.j_apply(v) * v, axis=0))) <= 1e-13
    z = np.array([1.0, 2.0, 4.0])
    assert_allclose(system.eta(z), [1.0, 1.0, 1.0])
    assert system.hamiltonian(z) == pytest.approx(0.5 * (1 + 2 + 4))
    assert_allclose(system.b_apply(np.pi / 4, z), [1.0, 0.0, 0.0], atol=1e-15)
    with pytest.raises(ValueError):
        RigidBodyParams(inertias=(1.0, 0.0, 1.0))


def test_wave_dimensions():
    params = WaveParams()
    ops = wave_operators(params)
    assert params.dim == 23
    assert ops.h == pytest.approx(10.0 / 11.0)
    assert ops.D.shape == (11, 12)
    assert ops.C.shape == (23, 23)
    assert_allclose(ops.C, ops.C.T)
    np.linalg.cholesky(ops.C)
    assert_allclose(ops.stiffness.sum(axis=1), 0.0, atol=1e-14)
    assert ops.M.sum() == pytest.approx(params.n + 1)


def test_wave_boundary_input_signs():
    params = WaveParams(n=3)
    system = make_damped_wave(params)
    b = system.b_apply(0.0, np.zeros(params.dim))
    expected = np.zeros(params.dim)
    expected[params.n + 1] = 1.0
    expected[-1] = -1.0
    assert_allclose(b, expected)


def test_friction_action_matches_assembled_matrix(rng):
    ops = wave_operators(WaveParams())
    for _ in range(3):
        v2 = rng.standard_normal(12)
        assert_allclose(friction_action(ops, v2), friction_matrix(ops, v2) @ v2, rtol=1e-12, atol=1e-13)
    batch = rng.standard_normal((12, 3))
    assert_allclose(friction_action(ops, batch)[:, 1], friction_action(ops, batch[:, 1]), rtol=1e-13, atol=1e-14)


def test_friction_is_the_load_of_the_nonlinear_flux(rng):
    ops = wave_operators(WaveParams(n=4))
    v2 = rng.standard_normal(6)
    xi, w = ops.quad_nodes, ops.quad_weights
    load = np.zeros(6)
    for c in range(5):
        v = v2[c] * (1 - xi) + v2[c + 1] * xi
        flux = (v + v ** 3) / np.sqrt(1 + v ** 2)
        load[c] += ops.h * np.sum(w * flux * (1 - xi))
        load[c + 1] += ops.h * np.sum(w * flux * xi)
    assert_allclose(friction_action(ops, v2), load, rtol=1e-12, atol=1e-13)
    assert np.all(psi(v2) >= 1.0)


def test_wave_dissipation_is_nonnegative(rng):
    system = make_damped_wave(WaveParams(nu=1.0))
    v = rng.standard_normal((23, 50))
    assert np.min(np.sum(system.r_apply(v) * v, axis=0)) >= 0.0


def test_wave_initial_state():
    params = WaveParams()
    z0 = wave_reference_initial_state(params)
    ops = wave_operators(params)
    assert z0.shape == (23,)
    assert_allclose(z0[:11], 1.0 + 0.5 * np.sin(np.pi * ops.midpoints / 10.0))
    assert z0[11] == pytest.approx(-8.0)
    assert z0[-1] == pytest.approx(8.0)
    assert_allclose(wave_grid_state(params, np.zeros_like, np.ones_like), np.r_[np.zeros(11), np.ones(12)])


def test_wave_parameter_validation():
    with pytest.raises(ValueError):
        WaveParams(n=0)
    with pytest.raises(ValueError):
        WaveParams(gamma=-0.1)
