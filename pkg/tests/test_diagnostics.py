import math

import numpy as np
import pytest

from graphks import (
    BoundViolated,
    DiscreteLaplacian,
    LogisticPreset,
    Mesh,
    SolverConfig,
    build_plan,
    check_logistic_bounds,
    interval_graph,
    l1_ode_bound,
    lp_norm,
    solve_reference,
    w1p_norm,
)
from graphks.diagnostics import fit_operator_norm, logistic_equilibrium, norm_target


def test_lp_norm_closed_forms(interval_mesh):
    u = interval_mesh.sample(lambda eid, x: np.sin(math.pi * x))
    # int_0^1 sin^2 = 1/2
    assert lp_norm(u, 2.0) == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-4)
    assert lp_norm(u, math.inf) == pytest.approx(1.0, abs=1e-3)
    assert lp_norm(u, 1.0) == pytest.approx(2.0 / math.pi, abs=1e-3)


def test_w1p_norm(interval_mesh):
    u = interval_mesh.sample(lambda eid, x: np.sin(math.pi * x))
    val = w1p_norm(u, 2.0)
    exact = math.sqrt(0.5 + math.pi ** 2 * 0.5)
    assert val == pytest.approx(exact, rel=1e-3)


def test_norm_target_table():
    assert norm_target("heat", 1.0, 2.0) == pytest.approx(-0.25)
    assert norm_target("heat", 2.0, math.inf) == pytest.approx(-0.25)
    assert norm_target("heat_dx", 1.0, 1.0) == pytest.approx(-0.5)
    assert norm_target("heat_dx", 1.0, 2.0) == pytest.approx(-0.75)
    with pytest.raises(ValueError):
        norm_target("resolvent", 1.0, 1.0)


def test_fit_detects_wrong_exponent():
    """Negative control: asking the plain semigroup to show the derivative
    exponent must fail the fit."""
    g = interval_graph(4.0)
    mesh = Mesh(g, 60)
    plan = build_plan(g, T=0.2)
    times = np.geomspace(2e-3, 0.1, 8)
    fit = fit_operator_norm(plan, mesh, "heat", 1.0, 2.0, times, seed=0)
    assert fit.passed
    assert abs(fit.fitted_slope - norm_target("heat_dx", 1.0, 2.0)) > 0.3


def test_l2_contraction_slope_is_zero():
    """p = q = 2 for the plain semigroup: bounded, exponent 0."""
    g = interval_graph(4.0)
    mesh = Mesh(g, 60)
    plan = build_plan(g, T=0.2)
    times = np.geomspace(2e-3, 0.1, 8)
    fit = fit_operator_norm(plan, mesh, "heat", 2.0, 2.0, times, seed=1)
    assert abs(fit.fitted_slope) <= 0.05
    assert np.all(fit.empirical_norms <= 1.0 + 1e-6)


def test_logistic_equilibrium_value():
    # k=0, l=1, m=1, eps=1, |G|=3: l*x = m x^2 / |G|  =>  x = 3
    assert logistic_equilibrium(0.0, 1.0, 1.0, 1.0, 3.0) == pytest.approx(3.0, abs=1e-9)
    # k only shifts the root upward
    assert logistic_equilibrium(0.5, 1.0, 1.0, 1.0, 3.0) > 3.0


def test_l1_ode_bound_branches():
    assert l1_ode_bound(0.0, 1.0, 1.0, 1.0, 3.0, 5.0, 10.0).value == pytest.approx(5.0)
    assert l1_ode_bound(0.0, 1.0, 1.0, 1.0, 3.0, 1.0, 10.0).value == pytest.approx(3.0)
    expo = l1_ode_bound(0.2, 0.7, 0.0, 1.0, 2.0, 1.0, 1.5)
    assert expo.branch == "exponential"
    ref = math.exp(0.7 * 1.5) * 1.0 + (0.2 * 2.0 / 0.7) * (math.exp(0.7 * 1.5) - 1.0)
    assert expo.value == pytest.approx(ref, rel=1e-12)
    lin = l1_ode_bound(0.3, 0.0, 0.0, 1.0, 2.0, 1.0, 4.0)
    assert lin.branch == "linear" and lin.value == pytest.approx(1.0 + 0.3 * 2.0 * 4.0)
    with pytest.raises(ValueError):
        l1_ode_bound(-0.1, 1.0, 1.0, 1.0, 3.0, 1.0, 1.0)


def test_check_logistic_bounds_pass_and_violation():
    g = interval_graph(1.0)
    mesh = Mesh(g, 40)
    preset = LogisticPreset(chi=0.5, k=0.0, l=1.0, m=1.0, eps=1.0)
    nl = preset.nonlinearity(tau=0.0, sigma=1.0)
    u0 = mesh.sample(lambda eid, x: 0.8 + 0.2 * np.cos(math.pi * x))
    L = DiscreteLaplacian(mesh)
    res = solve_reference(L, nl, u0, None, SolverConfig(dt=1e-3, t_end=2.0, record_interval=0.25))
    rows = check_logistic_bounds(res, preset, g.total_length)
    assert all(r["ok"] for r in rows)
    assert {"time", "mass_u", "mass_bound", "l2_norm", "linf_norm"} <= set(rows[0])
    # corrupt a state to force a violation
    bad = res
    bad.u_series[-1] = bad.u_series[-1] * 10.0
    with pytest.raises(BoundViolated) as exc:
        check_logistic_bounds(bad, preset, g.total_length)
    assert exc.value.worst_time == pytest.approx(bad.times[-1])
    assert exc.value.margin > 0
