import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from manufactured import (BELOW_FLOOR, convergence_table, eoc, linf_error, manufactured_defect, nodal_error,
                          records_to_frame, rigid_body_case, sampling_grid, toda_case, wave_case,
                          wrap_manufactured)
from models import RigidBodyParams, TodaParams, WaveParams
from phsystem import SolverConfig
from solver import TimePartition, integrate

TAUS = [0.25 / 2 ** i for i in range(5)]
TAU_REF = 1e-3
FLOOR = 1e-11


def _sweep(case, cfg, taus=TAUS, norm="plain", with_linf=True):
    system = wrap_manufactured(case)
    mass = system.mass_matrix() if norm == "mass" else None
    err_inf, err_nodal = [], []
    for tau in taus:
        sol = integrate(system, system.initial_state, TimePartition.from_step(5.0, tau), cfg)
        err_nodal.append(nodal_error(sol, case.z_exact, norm, mass))
        err_inf.append(linf_error(sol, case.z_exact, TAU_REF, norm, mass) if with_linf else None)
    return convergence_table(taus, err_inf, err_nodal, floor=FLOOR)


def _final_rate(rates):
    numeric = [r for r in rates if isinstance(r, float)]
    assert numeric, "every rate is floor-limited"
    return numeric[-1]


@pytest.mark.parametrize("case", [toda_case(), rigid_body_case(), wave_case()], ids=["toda", "rigid_body", "wave"])
def test_manufactured_identity_holds(rng, case):
    system = wrap_manufactured(case)
    times = rng.uniform(0.0, 5.0, 50)
    assert manufactured_defect(system, case, times) <= 1e-12
    assert case.derivative_defect(times) <= 1e-6
    assert_allclose(system.initial_state, case.z_exact(0.0))
    assert system.name.endswith("_manufactured")


def test_wrapping_keeps_structure():
    case = toda_case()
    system = wrap_manufactured(case)
    assert system.j_apply is case.base.j_apply
    assert system.r_apply is case.base.r_apply
    assert system.eta is case.base.eta


def test_wave_case_samples_midpoints_and_nodes():
    params = WaveParams()
    case = wave_case(params)
    z = case.z_exact(np.pi / 2)
    h = params.h
    assert z.shape == (23,)
    assert z[0] == pytest.approx(np.sin(0.5 * h))
    assert z[11] == 0.0
    assert z[-1] == pytest.approx(np.sin(10.0))
    assert case.z_exact(np.array([0.0, 1.0])).shape == (23, 2)


def test_eoc_rates_and_floor():
    rates = eoc([0.2, 0.1, 0.05], [4e-2, 1e-2, 2.5e-3])
    assert rates[0] is None
    assert rates[1] == pytest.approx(2.0)
    assert rates[2] == pytest.approx(2.0)
    rates = eoc([0.2, 0.1, 0.05], [1e-9, 1e-12, 1e-13], floor=1e-11)
    assert rates[1:] == [BELOW_FLOOR, BELOW_FLOOR]
    with pytest.raises(ValueError):
        eoc([0.1], [1e-3])


def test_convergence_table_sorts_and_frames():
    records = convergence_table([0.05, 0.2, 0.1], [1e-4, 1.6e-3, 4e-4], [1e-5, 1.6e-4, 4e-5])
    assert [r.tau for r in records] == [0.2, 0.1, 0.05]
    assert records[0].eoc_inf is None
    assert records[2].eoc_nodal == pytest.approx(2.0)
    frame = records_to_frame(records)
    assert list(frame.columns) == ["tau", "err_inf", "eoc_inf", "err_nodal", "eoc_nodal"]
    with pytest.raises(ValueError):
        convergence_table([0.1, 0.1], [1.0, 1.0], [1.0, 1.0])


def test_nodal_only_table_has_no_linf_rates():
    records = convergence_table([0.2, 0.1], [None, None], [1e-3, 2.5e-4])
    assert records[1].eoc_inf is None
    assert records[1].eoc_nodal == pytest.approx(2.0)


def test_sampling_grid_ends_at_final_time():
    grid = sampling_grid(0.0, 1.0, 0.3)
    assert_allclose(grid, [0.0, 0.3, 0.6, 0.9, 1.0])
    assert sampling_grid(0.0, 1.0, 0.25)[-1] == 1.0
    assert len(sampling_grid(0.0, 5.0, 1.25e-4)) == 40001


def test_mass_norm_weights_errors():
    params = WaveParams(n=2)
    case = wave_case(params)
    system = wrap_manufactured(case)
    sol = integrate(system, system.initial_state, TimePartition.from_step(1.0, 0.25), SolverConfig(k=2, s_pi=4))
    plain = nodal_error(sol, case.z_exact, "plain")
    weighted = nodal_error(sol, case.z_exact, "mass", system.mass_matrix())
    assert plain > 0 and weighted > 0 and plain != weighted
    with pytest.raises(ValueError):
        nodal_error(sol, case.z_exact, "energy")


def test_exact_on_resolved_polynomials():
    # z(t) = (t^2, t) with k = 2 lies in the trial space
    from models import make_rigid_body
    from manufactured import ManufacturedCase

    base = make_rigid_body(RigidBodyParams())
    case = ManufacturedCase(
        base,
        lambda t: np.stack([np.asarray(t, dtype=float) ** 2, np.asarray(t, dtype=float),
                            np.ones_like(np.asarray(t, dtype=float))]),
        lambda t: np.stack([2 * np.asarray(t, dtype=float), np.ones_like(np.asarray(t, dtype=float)),
                            np.zeros_like(np.asarray(t, dtype=float))]),
    )
    system = wrap_manufactured(case)
    sol = integrate(system, system.initial_state, TimePartition.from_step(1.0, 0.25), SolverConfig(k=2, s_q=4))
    assert linf_error(sol, case.z_exact, 1e-2) <= 1e-12


@pytest.mark.slow
@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_toda_linf_convergence(k):
    records = _sweep(toda_case(TodaParams()), SolverConfig(k=k, s_q=k, s_pi=k))
    rate = _final_rate([r.eoc_inf for r in records])
    assert k + 1 - 0.25 <= rate <= k + 1 + 0.35


@pytest.mark.slow
@pytest.mark.parametrize("k", [1, 2, 3])
def test_toda_nodal_superconvergence(k):
    records = _sweep(toda_case(TodaParams()), SolverConfig(k=k, s_q=k, s_pi=k), with_linf=False)
    rate = _final_rate([r.eoc_nodal for r in records])
    assert 2 * k - 0.4 <= rate <= 2 * k + 0.5


@pytest.mark.slow
@pytest.mark.parametrize("s_q,degraded", [(1, True), (2, True), (4, False), (5, False)])
def test_toda_quadrature_sensitivity(s_q, degraded):
    records = _sweep(toda_case(TodaParams()), SolverConfig(k=3, s_q=s_q, s_pi=3))
    rate = _final_rate([r.eoc_inf for r in records])
    if degraded:
        assert rate <= 3.5
    else:
        assert 3.75 <= rate <= 4.35


@pytest.mark.slow
@pytest.mark.parametrize("s_pi,degraded", [(1, True), (2, True), (4, False), (5, False)])
def test_toda_projection_sensitivity(s_pi, degraded):
    records = _sweep(toda_case(TodaParams()), SolverConfig(k=3, s_q=3, s_pi=s_pi))
    rate = _final_rate([r.eoc_inf for r in records])
    if degraded:
        assert rate <= 3.5
    else:
        assert 3.75 <= rate <= 4.35


@pytest.mark.slow
@pytest.mark.parametrize("k", [1, 2, 3])
def test_rigid_body_convergence(k):
    records = _sweep(rigid_body_case(RigidBodyParams()), SolverConfig(k=k, s_q=k, s_pi=k))
    assert abs(_final_rate([r.eoc_inf for r in records]) - (k + 1)) <= 0.35
    assert abs(_final_rate([r.eoc_nodal for r in records]) - 2 * k) <= 0.5


@pytest.mark.slow
@pytest.mark.parametrize("nu", [0.0, 1.0])
def test_wave_convergence(nu):
    records = _sweep(wave_case(WaveParams(nu=nu)), SolverConfig(k=2, s_q=2, s_pi=4), norm="mass")
    assert abs(_final_rate([r.eoc_inf for r in records]) - 3) <= 0.35
    assert abs(_final_rate([r.eoc_nodal for r in records]) - 4) <= 0.5


@pytest.mark.slow
def test_wave_error_is_robust_under_mesh_refinement():
    taus = TAUS[:3]
    errors = []
    for n in (8, 16, 32, 64):
        records = _sweep(wave_case(WaveParams(n=n)), SolverConfig(k=4, s_q=4, s_pi=8), taus=taus, norm="mass")
        errors.append([r.err_inf for r in records])
    errors = np.array(errors)
    for column in errors.T:
        assert column.max() <= 5.0 * column.min()
    assert np.all(np.isfinite(errors)) and not math.isnan(errors.sum())
