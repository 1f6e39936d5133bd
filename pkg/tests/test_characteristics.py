import dataclasses

import numpy as np
import pytest

from stringlab import datasets
from stringlab.characteristics import (
    InadmissibleDataError,
    _ScalarPair,
    admissibility,
    build_flow,
    evolve_cells,
    evolve_states,
    galilean_on_solution,
    reconstruct_string,
    residual_augmented,
    residual_string,
    solve_augmented,
    tau_slope_consistency,
    xi_evaluate,
    xi_time_inverse,
    xi_wave_residual,
)
from stringlab.geometry import DomainError, in_cm, in_g, in_m
from stringlab.profiles import Profile
from stringlab.waves import dalembert_wave_solve, oscillatory_family_init, wave_to_augmented

KAPPA = 2.0 ** -0.5


# -- admissibility ------------------------------------------------------------

def test_admissibility_constant_wave_state():
    p = datasets.constant_profile(KAPPA, 0.0, [0.1, 0, 0], [0, 0, 0])
    win = admissibility(p)
    assert win.alpha == pytest.approx(0.0, abs=1e-15)
    assert win.delta == pytest.approx(KAPPA, abs=1e-15)  # min(kappa, 1/kappa)


def test_admissibility_rejects_with_pair():
    n = 64
    tau = np.full(n, 0.3)
    v = np.zeros(n)
    v[10] = 0.45   # v - tau = 0.15 here
    v[40] = -0.26  # v + tau = 0.04 there
    p = Profile(-np.pi, 2 * np.pi / n, tau, v, np.zeros((n, 3)), np.zeros((n, 3)))
    with pytest.raises(InadmissibleDataError) as err:
        admissibility(p)
    assert err.value.pair == (10, 40)
    assert "v - tau" in str(err.value) and "v + tau" in str(err.value)


def test_admissibility_nonpositive_tau():
    p = datasets.constant_profile(0.5, 0.0, [0, 0, 0], [0, 0, 0])
    p.tau[3] = -0.1
    with pytest.raises(InadmissibleDataError):
        admissibility(p)


def test_admissibility_window_contains_data():
    p = datasets.smooth_manifold_profile(n=512)
    win = admissibility(p)
    assert win.delta > 0.0
    assert np.all(in_g(p.state(), win.alpha, win.delta, 1e-12))
    # data lying in G_{0, 0.52} by construction is accepted with at least that
    # slack; alpha is optimal only up to where the grid samples the extremes
    assert abs(win.alpha) < 1e-4
    assert win.delta >= 0.52 - 1e-9


# -- flow construction --------------------------------------------------------

def test_flow_constant_state_is_linear():
    p = datasets.constant_profile(0.6, 0.0, [0.2, 0, 0], [0, 0.1, 0])
    flow = build_flow(p)
    y = np.array([-7.3, -1.0, 0.0, 0.4, 11.8])
    assert np.max(np.abs(flow.xi0(y) - 0.6 * y)) < 1e-12
    assert np.max(np.abs(flow.xi0_inverse(0.6 * y) - y)) < 1e-11


def test_flow_wave_state_is_linear():
    prof = wave_to_augmented(oscillatory_family_init(3, n=1024))
    flow = build_flow(prof)
    y = np.linspace(-9.0, 9.0, 41)
    # linear ODE solution, up to accumulated summation roundoff
    assert np.max(np.abs(flow.xi0(y) - KAPPA * y)) < 1e-11


def test_flow_ode_residual_at_substep_midpoints():
    from stringlab.characteristics import _hermite_table_eval

    p = datasets.smooth_manifold_profile(n=1024)
    flow = build_flow(p)
    rhs = _ScalarPair(p.s0, p.ds, p.tau, p.v, p.boundary)
    m = len(flow.xi_nodes)
    y_mid = flow.y_first + flow.h * (np.arange(m - 1) + 0.5)
    dxi = _hermite_table_eval(flow.y_first, flow.h, flow.xi_nodes, flow.xi_slopes,
                              y_mid, deriv=True)
    target = np.array([rhs(x)[0] for x in flow.xi0(y_mid)])
    assert np.max(np.abs(dxi - target)) < 1e-10


def test_flow_normalization_and_slope_bounds():
    p = datasets.smooth_manifold_profile(n=1024)
    flow = build_flow(p)
    assert abs(flow.xi0(np.zeros(1))[0]) < 1e-15
    assert abs(flow.phi0(np.zeros(1))[0]) < 1e-15
    y = np.linspace(-12.0, 12.0, 501)
    for t in (-2.0, 0.0, 0.7, 3.0):
        _, _, dxi_dy = xi_evaluate(flow, t, y)
        assert np.min(dxi_dy) >= flow.delta - 1e-10
        assert np.max(dxi_dy) <= 1.0 / flow.delta + 1e-10


def test_flow_requires_grid_containing_zero():
    p = datasets.smooth_manifold_profile(n=256, s0=10.0)
    with pytest.raises(DomainError):
        build_flow(p)


# -- xi evaluation ------------------------------------------------------------

def test_xi_constant_state_closed_form():
    p = datasets.constant_profile(0.55, 0.12, [0.2, 0, 0], [0, 0, 0])
    flow = build_flow(p)
    y = np.linspace(-4.0, 4.0, 17)
    for t in (-2.3, 0.0, 1.6):
        xi, dxi_dt, dxi_dy = xi_evaluate(flow, t, y)
        assert np.max(np.abs(xi - (0.55 * y + 0.12 * t))) < 1e-12
        assert np.max(np.abs(dxi_dt - 0.12)) < 1e-12
        assert np.max(np.abs(dxi_dy - 0.55)) < 1e-12


def test_xi_at_time_zero():
    p = datasets.smooth_manifold_profile(n=512)
    flow = build_flow(p)
    y = np.linspace(-3.0, 3.0, 33)
    xi, _, dxi_dy = xi_evaluate(flow, 0.0, y)
    assert np.max(np.abs(xi - flow.xi0(y))) < 1e-13
    U = p.fields_at(flow.xi0(y))
    assert np.max(np.abs(dxi_dy - U.tau)) < 5e-9


def test_xi_wave_residual_refinement_order():
    res = []
    ns = (512, 1024, 2048)
    for n in ns:
        p = datasets.smooth_manifold_profile(n=n)
        flow = build_flow(p)
        res.append(xi_wave_residual(flow, [0.3, 0.9], np.linspace(-2, 2, 31),
                                    8.0 * p.period / n))
    orders = [np.log2(res[i] / res[i + 1]) for i in range(2)]
    assert min(orders) >= 1.9


def test_xi_derivative_consistency():
    # packet route for dt xi against finite differences of the table route
    p = datasets.smooth_manifold_profile(n=1024)
    flow = build_flow(p)
    y = np.linspace(-2.0, 2.0, 21)
    eps = 1e-5
    for t in (0.4, -1.1):
        xi_p, dxi_dt, _ = xi_evaluate(flow, t, y)
        xi_a, _, _ = xi_evaluate(flow, t + eps, y)
        xi_b, _, _ = xi_evaluate(flow, t - eps, y)
        assert np.max(np.abs((xi_a - xi_b) / (2 * eps) - dxi_dt)) < 1e-7


def test_xi_time_inverse_tolerance():
    p = datasets.smooth_manifold_profile(n=1024)
    flow = build_flow(p)
    s = np.linspace(-5.0, 5.0, 101)
    for t in (-1.2, 0.8):
        y = xi_time_inverse(flow, t, s)
        xi, _, _ = xi_evaluate(flow, t, y)
        assert np.max(np.abs(xi - s)) < 1e-11


# -- solving ------------------------------------------------------------------

def test_solve_constant_state():
    p = datasets.constant_profile(0.6, 0.1, [0.3, 0, 0], [0.2, 0.1, 0])
    flow = build_flow(p)
    for t in (-5.0, 0.0, 2.5):
        sol = solve_augmented(flow, t)
        assert np.max(np.abs(sol.tau - 0.6)) < 1e-14
        assert np.max(np.abs(sol.v - 0.1)) < 1e-14
        assert np.max(np.abs(sol.eta - [0.3, 0, 0])) < 1e-14
        assert np.max(np.abs(sol.zeta - [0.2, 0.1, 0])) < 1e-14


@pytest.mark.parametrize("d", [1, 3])
def test_solve_preserves_manifold(d):
    p = datasets.smooth_manifold_profile(n=2048, d=d)
    flow = build_flow(p)
    for t in (-5.0, -1.0, 0.3, 1.0, 5.0):
        U = solve_augmented(flow, t).state()
        assert np.max(np.abs(U.sum_squares() - 1.0)) < 1e-6
        assert np.max(np.abs(U.cross())) < 1e-6


def test_solve_preserves_single_branch_sphere():
    # data on one branch sphere only (the other strictly inside) stays there
    from stringlab.geometry import in_m_eps, state_from_blocks

    n, d = 1024, 3
    s0, period = -2 * np.pi, 4 * np.pi
    ds = period / n
    s = s0 + ds * np.arange(n)
    a_p = 0.62 + 0.1 * np.sin(s)
    a_m = -0.62 + 0.1 * np.sin(s + 2.0)
    u1 = np.stack([np.cos(0.25 * np.sin(s)), np.sin(0.25 * np.sin(s)), 0 * s], axis=1)
    c_p = np.sqrt(1.0 - a_p**2)[:, None] * u1            # on the + sphere
    c_m = 0.7 * np.sqrt(1.0 - a_m**2)[:, None] * u1      # strictly inside
    U0 = state_from_blocks(a_p, a_m, c_p, c_m)
    p = Profile.from_state(s0, ds, U0, "periodic")
    flow = build_flow(p)
    for t in (-1.5, 0.8):
        U = solve_augmented(flow, t).state()
        assert np.all(in_m_eps(U, 1, 1e-6))
        assert not np.all(in_m_eps(U, -1, 1e-6))


def test_solve_preserves_hull_window():
    p = datasets.smooth_hull_profile(n=2048)
    flow = build_flow(p)
    for t in (-2.0, 0.5, 3.0):
        U = solve_augmented(flow, t).state()
        assert np.all(in_cm(U, 1e-8 + 1e-6))
        assert np.all(in_g(U, flow.alpha, flow.delta, 1e-8 + 1e-6))


def test_solve_matches_wave_solution():
    init = oscillatory_family_init(2, n=16384)
    prof = wave_to_augmented(init)
    flow = build_flow(prof)
    s_pts = np.linspace(-np.pi, np.pi, 257)
    times = np.linspace(-np.pi, np.pi, 17)
    graphs = reconstruct_string(flow, times, s_pts)
    worst = 0.0
    for g in graphs:
        ref = dalembert_wave_solve(init, g.t, s_pts)
        worst = max(worst, float(np.max(np.abs(g.X - ref.X))))
    assert worst < 1e-6


def test_solve_semigroup_property():
    p = datasets.smooth_manifold_profile(n=2048)
    flow = build_flow(p)
    t1, t2 = 0.6, 0.9
    mid = solve_augmented(flow, t1)
    two_step = solve_augmented(build_flow(mid), t2)
    direct = solve_augmented(flow, t1 + t2)
    dev = max(np.max(np.abs(two_step.tau - direct.tau)), np.max(np.abs(two_step.v - direct.v)),
              np.max(np.abs(two_step.eta - direct.eta)), np.max(np.abs(two_step.zeta - direct.zeta)))
    pk = np.concatenate([(p.v + p.tau)[:, None], (p.v - p.tau)[:, None],
                         p.eta - p.zeta, p.eta + p.zeta], axis=1)
    curv = np.max(np.abs(np.diff(pk, 2, axis=0))) / p.ds**2
    assert dev <= 10 * (p.ds**2 * curv / 8.0)


def test_finite_propagation_exact_tails():
    n, d = 512, 3
    s0, period = -2 * np.pi, 4 * np.pi
    ds = period / n
    s = s0 + ds * np.arange(n)
    bump = np.exp(-8.0 * s**2) * (np.abs(s) < 2.0)
    p = Profile(s0, ds, 0.6 + 0.05 * bump, 0.03 * bump,
                np.stack([0.2 * bump, 0 * s, 0 * s], axis=1), np.zeros((n, d)), "constant")
    flow = build_flow(p)
    c_max = float(np.max(np.abs(p.v) + p.tau))
    for t in (0.8, 1.9):
        far = np.array([2.0 + c_max * t + 0.3, -2.0 - c_max * t - 0.3])
        U = evolve_states(flow, t, far)
        assert np.max(np.abs(U.tau - 0.6)) < 1e-13
        assert np.max(np.abs(U.v)) < 1e-13
        assert np.max(np.abs(U.eta)) < 1e-13
        assert np.max(np.abs(U.zeta)) < 1e-13


def test_tau_slope_cross_check():
    p = datasets.smooth_manifold_profile(n=2048)
    flow = build_flow(p)
    assert tau_slope_consistency(flow, 0.7, p.s_samples) < 5e-4


def test_rough_flow_exact_transport():
    base = datasets.rough_manifold_base(cells=101)
    flow = build_flow(base)
    assert flow.mode == "pc"
    for t in (0.4, 1.7):
        cells = evolve_cells(flow, t)
        U = cells.states
        # exactly on the manifold: transport is exact for cell data
        assert np.max(np.abs(U.sum_squares() - 1.0)) < 1e-12
        assert np.max(np.abs(U.cross())) < 1e-12
        # uniform-grid sampling agrees with the exact cell representation
        mids = 0.5 * (cells.breaks[:-1] + cells.breaks[1:])
        S = evolve_states(flow, t, mids)
        assert np.max(np.abs(S.tau - U.tau)) == 0.0
        assert np.max(np.abs(S.eta - U.eta)) == 0.0


def test_rough_flow_far_times_and_negative_times():
    base = datasets.rough_manifold_base(cells=101)
    flow = build_flow(base)
    from stringlab.characteristics import _xi_only

    for t in (-25.0, 37.7):  # several straightened periods away
        cells = evolve_cells(flow, t)
        U = cells.states
        assert np.max(np.abs(U.sum_squares() - 1.0)) < 1e-11
        assert np.max(np.abs(U.cross())) < 1e-11
        assert np.all(np.diff(cells.breaks) >= 0.0)
        # straightened-window length is preserved exactly
        a_y, b_y = -0.8, 1.9
        sa = float(_xi_only(flow, t, np.array([a_y]))[0])
        sb = float(_xi_only(flow, t, np.array([b_y]))[0])
        from stringlab.weak import TestFunction, pairing

        val = pairing(cells, TestFunction.indicator(sa, sb), "h", base.period)
        assert val == pytest.approx(b_y - a_y, abs=1e-10)


def test_xi0_inverse_across_periods():
    p = datasets.smooth_manifold_profile(n=1024)
    flow = build_flow(p)
    y = np.linspace(-40.0, 40.0, 257)  # spans multiple straightened periods
    back = flow.xi0_inverse(flow.xi0(y))
    assert np.max(np.abs(back - y)) < 1e-9


def test_evolve_cells_requires_rough():
    p = datasets.smooth_manifold_profile(n=256)
    with pytest.raises(DomainError):
        evolve_cells(build_flow(p), 0.5)


# -- reconstruction and residuals ----------------------------------------------

def test_reconstruct_constant_state_affine():
    p = datasets.constant_profile(0.6, 0.1, [0.3, 0, 0], [0.2, 0.1, 0])
    flow = build_flow(p)
    s_pts = np.linspace(-2.0, 2.0, 33)
    g0, g1 = reconstruct_string(flow, [0.0, 1.0], s_pts)
    assert np.max(np.abs(np.diff(g0.X, 2, axis=0))) < 1e-13   # linear in s
    step = (g1.X - g0.X)
    assert np.max(np.abs(step - step[0])) < 1e-13             # linear in t
    i0 = np.argmin(np.abs(s_pts))
    assert np.max(np.abs(g0.X[i0])) < 1e-13                   # X(0,0) = 0


def test_reconstruct_path_independence():
    p = datasets.smooth_manifold_profile(n=2048)
    flow = build_flow(p)
    s_pts = np.linspace(-np.pi, np.pi, 1025)
    (g,) = reconstruct_string(flow, [0.6], s_pts)
    dXds_fd = np.gradient(g.X, g.ds, axis=0)
    dev = np.max(np.abs(dXds_fd[2:-2] - g.dXds[2:-2]))
    assert dev < 30.0 * g.ds**2


def test_reconstruct_degenerate_guard():
    p = datasets.smooth_manifold_profile(n=256)
    flow = build_flow(p)
    inflated = dataclasses.replace(flow, delta=3.0 * float(np.max(p.tau)))
    with pytest.raises(DomainError):
        reconstruct_string(inflated, [0.0], np.linspace(-1, 1, 17))


def test_residual_string_constant_is_zero():
    p = datasets.constant_profile(0.6, 0.1, [0.3, 0, 0], [0.2, 0.1, 0])
    flow = build_flow(p)
    dt = 0.02
    graphs = reconstruct_string(flow, [0.5 - dt, 0.5, 0.5 + dt], np.linspace(-2, 2, 33))
    assert np.max(np.abs(residual_string(graphs, dt))) < 1e-12


def test_residual_augmented_constant_is_zero():
    p = datasets.constant_profile(0.6, 0.1, [0.3, 0, 0], [0.2, 0.1, 0])
    flow = build_flow(p)
    dt = 0.01
    stack = [solve_augmented(flow, t) for t in (0.5 - dt, 0.5, 0.5 + dt)]
    assert residual_augmented(stack, dt)["max_abs"] < 1e-12


def test_residual_augmented_refinement_order():
    res = []
    ns = (512, 1024, 2048, 4096)
    for n in ns:
        p = datasets.smooth_manifold_profile(n=n)
        flow = build_flow(p)
        dt = 2.0 * p.ds  # truncation-dominated stencil
        stack = [solve_augmented(flow, t) for t in (0.7 - dt, 0.7, 0.7 + dt)]
        res.append(residual_augmented(stack, dt)["max_abs"])
    slope = np.polyfit(np.log(ns), np.log(res), 1)[0]
    assert -slope >= 1.9


def test_residual_string_wave_family_order():
    rs = []
    for n in (1024, 2048, 4096):
        init = oscillatory_family_init(2, n=n)
        dt = 2.0 * init.ds
        graphs = [dalembert_wave_solve(init, t) for t in (0.5 - dt, 0.5, 0.5 + dt)]
        rs.append(float(np.max(np.abs(residual_string(graphs, dt)))))
    orders = [np.log2(rs[i] / rs[i + 1]) for i in range(2)]
    assert min(orders) >= 1.9


def test_galilean_transform():
    p = datasets.constant_profile(0.6, 0.1, [0.3, 0, 0], [0, 0, 0])
    flow = build_flow(p)
    s = p.s_samples
    # u = 0 is the identity
    (same,) = galilean_on_solution(flow, 0.0, [0.7], s)
    ref = solve_augmented(flow, 0.7)
    assert np.max(np.abs(same.v - ref.v)) < 1e-14
    # constant state stays exact under any boost
    (boosted,) = galilean_on_solution(flow, 0.3, [0.7], s)
    assert np.max(np.abs(boosted.v - 0.4)) < 1e-14
    assert np.max(np.abs(boosted.tau - 0.6)) < 1e-14


def test_galilean_residual_within_factor_two():
    p = datasets.smooth_manifold_profile(n=2048)
    flow = build_flow(p)
    dt = 2.0 * p.ds
    times = [0.7 - dt, 0.7, 0.7 + dt]
    plain = [solve_augmented(flow, t) for t in times]
    r0 = residual_augmented(plain, dt)["max_abs"]
    shifted = galilean_on_solution(flow, 0.05, times, p.s_samples)
    r1 = residual_augmented(shifted, dt)["max_abs"]
    assert r1 <= 2.0 * r0
