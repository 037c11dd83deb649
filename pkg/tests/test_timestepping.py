"""Explicit RK stepping: CFL formula, single-step oracles, evolve contract."""

from __future__ import annotations

import numpy as np
import pytest

from dgflow import (
    EvolveConfig,
    FlowProblem,
    InstabilityError,
    Interval,
    SemiDiscreteRHS,
    build_interval_mesh,
    cfl_dt,
    evolve,
    get_problem,
    l2_error,
    l2_project,
    make_basis,
    step,
)


def _const_a_flow(a_val, c_val=0.0):
    return FlowProblem(
        name="ode", domain=Interval(0.0, 1.0),
        a=lambda x, t: np.full((len(np.atleast_2d(x)), 1), a_val),
        c=lambda x, t: np.full(len(np.atleast_2d(x)), c_val),
        u0=lambda x: np.ones(len(np.atleast_2d(x))),
        u_D=lambda x, t: np.zeros(len(np.atleast_2d(x))),
        div_a=lambda x, t: np.zeros(len(np.atleast_2d(x))),
    )


def test_cfl_dt_formula():
    mesh = build_interval_mesh(0.0, 1.0, 10)
    dt = cfl_dt(mesh, _const_a_flow(2.0), p=1, cfl=0.3, t=0.0, t_end=10.0)
    assert dt == pytest.approx(0.3 * 0.1 / (2.0 * 3.0))


def test_cfl_dt_variable_velocity():
    mesh = build_interval_mesh(0.0, 1.0, 8)
    flow = get_problem("stretch1d")  # a = x+1, max 2 on (0,1)
    dt = cfl_dt(mesh, flow, p=2, cfl=0.5, t=0.0, t_end=10.0)
    # 0.5 * 0.125 / (2 * 5); vertex sampling sees the max of a at x = 1
    assert dt == pytest.approx(0.00625, abs=1e-15)


def test_cfl_dt_zero_velocity_caps_at_remaining_time():
    mesh = build_interval_mesh(0.0, 1.0, 4)
    dt = cfl_dt(mesh, _const_a_flow(0.0), p=1, cfl=0.5, t=1.25, t_end=2.0)
    assert dt == pytest.approx(0.75)


def _scalar_ode_op(c_val):
    # single p=0 element with a = 0 embeds u' = -c u
    mesh = build_interval_mesh(0.0, 1.0, 1)
    basis = make_basis(1, 0)
    flow = _const_a_flow(0.0, c_val=c_val)
    op = SemiDiscreteRHS(mesh, basis, flow)
    u = l2_project(lambda x, t: np.ones(len(x)), 0.0, mesh, basis)
    return op, u


def _scalar_value(u):
    # p = 0 modal coefficient is value * sqrt(measure); measure is 1 here
    return float(u.coeffs[0, 0])


def test_rk4_single_step_oracle():
    op, u = _scalar_ode_op(1.0)
    out = step(op, u, 0.0, 0.1, "rk4")
    # truncated Taylor series of e^{-0.1} through dt^4: 0.9048375 exactly
    assert _scalar_value(out) == pytest.approx(0.9048375, abs=1e-15)
    assert abs(_scalar_value(out) - np.exp(-0.1)) < 1e-7


def test_ssprk3_single_step_oracle():
    op, u = _scalar_ode_op(1.0)
    out = step(op, u, 0.0, 0.1, "ssprk3")
    # Shu-Osher stages for u' = -u, dt = 0.1:
    #   u1 = 0.9, u2 = 3/4 + 1/4(0.9 - 0.09) = 0.9525,
    #   u  = 1/3 + 2/3(0.9525 - 0.09525) = 0.9048333...
    val = _scalar_value(out)
    assert val == pytest.approx(0.90483333333333332, abs=1e-15)
    # third-order truncation error against e^{-0.1} is visible at ~4.2e-6
    assert 1e-6 < abs(val - np.exp(-0.1)) < 1e-5


def test_step_of_steady_state_is_identity():
    flow = _const_a_flow(1.0)
    flow = FlowProblem(
        name="steady", domain=flow.domain, a=flow.a, c=flow.c,
        u0=lambda x: np.ones(len(np.atleast_2d(x))),
        u_D=lambda x, t: np.ones(len(np.atleast_2d(x))),
        div_a=flow.div_a)
    mesh = build_interval_mesh(0.0, 1.0, 4)
    basis = make_basis(1, 2)
    op = SemiDiscreteRHS(mesh, basis, flow)
    u = l2_project(lambda x, t: np.ones(len(x)), 0.0, mesh, basis)
    for scheme in ("ssprk3", "rk4"):
        out = step(op, u, 0.0, 0.05, scheme)
        assert np.max(np.abs(out.coeffs - u.coeffs)) < 1e-12


def test_unstable_step_raises_with_time_and_dt():
    flow = get_problem("translate1d")
    mesh = build_interval_mesh(0.0, 1.0, 32)
    basis = make_basis(1, 2)
    op = SemiDiscreteRHS(mesh, basis, flow)
    u = l2_project(lambda x, t: flow.u0(x), 0.0, mesh, basis)
    with pytest.raises(InstabilityError) as err:
        t = 0.0
        for _ in range(200):
            u = step(op, u, t, 0.5, "rk4")  # dt far beyond the CFL limit
            t += 0.5
    assert "dt" in str(err.value)
    assert err.value.dt == 0.5


def test_evolve_config_validation():
    with pytest.raises(ValueError):
        EvolveConfig(t_end=1.0, cfl=0.0)
    with pytest.raises(ValueError):
        EvolveConfig(t_end=1.0, cfl=1.5)
    with pytest.raises(ValueError):
        EvolveConfig(t_end=-1.0)
    with pytest.raises(ValueError):
        EvolveConfig(t_end=1.0, sample_times=[0.5, 0.5])
    with pytest.raises(ValueError):
        EvolveConfig(t_end=1.0, sample_times=[0.5, 2.0])
    with pytest.raises(ValueError):
        EvolveConfig(t_end=1.0, scheme="euler")


def test_evolve_zero_horizon_reports_projection_only():
    flow = get_problem("translate1d")
    mesh = build_interval_mesh(0.0, 1.0, 8)
    basis = make_basis(1, 1)
    seen = []
    u = evolve(flow, mesh, basis, EvolveConfig(t_end=0.0),
               observer=lambda t, f: seen.append(t))
    assert seen == [0.0]
    ref = l2_project(lambda x, t: flow.u0(x), 0.0, mesh, basis)
    assert np.array_equal(u.coeffs, ref.coeffs)


def test_evolve_hits_sample_times_bit_exactly():
    flow = get_problem("translate1d")
    mesh = build_interval_mesh(0.0, 1.0, 8)
    basis = make_basis(1, 1)
    samples = [0.1, 0.25, 0.3000000001, 0.5]
    seen = []
    evolve(flow, mesh, basis,
           EvolveConfig(t_end=0.5, sample_times=samples),
           observer=lambda t, f: seen.append(t))
    assert seen[0] == 0.0
    for want in samples:
        assert want in seen  # bit-exact landing, not approximate
    assert seen[-1] == 0.5


def test_evolve_translates_bump_mass_center():
    flow = FlowProblem(
        name="bump", domain=Interval(0.0, 1.0),
        a=lambda x, t: np.ones((len(np.atleast_2d(x)), 1)),
        c=lambda x, t: np.zeros(len(np.atleast_2d(x))),
        u0=lambda x: np.exp(-200.0 * (np.atleast_2d(x)[:, 0] - 0.3) ** 2),
        u_D=lambda x, t: np.zeros(len(np.atleast_2d(x))),
        div_a=lambda x, t: np.zeros(len(np.atleast_2d(x))),
    )
    mesh = build_interval_mesh(0.0, 1.0, 64)
    basis = make_basis(1, 2)
    u = evolve(flow, mesh, basis, EvolveConfig(t_end=0.3, cfl=0.2))

    from dgflow._geometry import volume_tables
    vol = volume_tables(mesh, basis, 8)
    vals = np.einsum("qm,em->eq", vol.phi, u.coeffs)
    w = vol.det[:, None] * vol.quad.weights[None, :]
    center = float(np.sum(w * vals * vol.x[:, :, 0]) / np.sum(w * vals))
    assert abs(center - 0.6) < 2.0 * mesh.h_max


@pytest.mark.parametrize("scheme,order", [("ssprk3", 3.0), ("rk4", 4.0)])
def test_temporal_convergence_order(scheme, order):
    flow = get_problem("stretch1d")
    mesh = build_interval_mesh(0.0, 1.0, 16)
    basis = make_basis(1, 2)
    t_end = 0.2

    def run(dt):
        return evolve(flow, mesh, basis,
                      EvolveConfig(t_end=t_end, scheme=scheme, fixed_dt=dt))

    # dt must sit inside the stability envelope h/(|a|(2p+1)) ~ 0.006,
    # otherwise the coarse run's deviation is stability- not accuracy-driven
    ref = run(0.00025)
    devs = [float((run(dt) - ref).norm_l2()) for dt in (0.004, 0.002)]
    got = np.log2(devs[0] / devs[1])
    assert abs(got - order) <= 0.4, (devs, got)


def test_evolve_matches_characteristic_solution_on_fine_mesh():
    flow = get_problem("stretch1d")
    mesh = build_interval_mesh(0.0, 1.0, 64)
    basis = make_basis(1, 2)
    u = evolve(flow, mesh, basis, EvolveConfig(t_end=1.0, cfl=0.2))
    err = l2_error(u, flow.exact, 1.0)
    assert err < 1e-3, err


def test_deterministic_env_override(monkeypatch):
    monkeypatch.setenv("DG_DETERMINISTIC", "1")
    cfg = EvolveConfig(t_end=1.0, deterministic=False)
    assert cfg.deterministic is True
