import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiopt.homogeneity import SphereBudget
from hiopt.lft import PowerKInfinity, lf_transform
from hiopt.sim import (
    CostPieces,
    Disturbance,
    DisturbanceSpec,
    IntegrationError,
    cost_identity_check,
    delta_w,
    evaluate_cost,
    expr_controller,
    integrate,
    l2_gain_check,
    output_energy,
    worst_case_w,
    zero_controller,
)
from hiopt.synthesis import config_from_params, synthesize
from hiopt.sysdef import HomogeneousSystem, LyapunovCandidate, SystemModel, builtin_examples


def model_of(name):
    b = builtin_examples()[name]
    return b, SystemModel(b.system, b.lyapunov)


def test_ex1_closed_form():
    b, m = model_of("ex1")
    u = expr_controller(b.exprs["alpha_star"], b.system.variables)
    for x0 in (0.5, 1.0, -2.0):
        traj = integrate(m, u, DisturbanceSpec("zero"), [x0], 10.0, 1e-9)
        exact = x0 / np.sqrt(1 + 10 * x0**2 * traj.times)
        assert np.max(np.abs(traj.states[:, 0] - exact)) <= 1e-6
    assert len(traj.times) >= 1000
    assert output_energy(traj)[-1] == pytest.approx(np.log1p(10 * 4 * 10) / 10, abs=1e-4)


def test_finite_time_origin_clamp():
    # x' = -x^(1/3) reaches 0 at t = 3/2 from x0 = 1
    sys = HomogeneousSystem.build([1.0], -2 / 3, ["0"], ["1"], [["1"]], ["x1"], [0.0])
    m = SystemModel(sys, LyapunovCandidate.build("x1^2/2", 2.0))
    traj = integrate(m, expr_controller("-spow(x1, 1/3)", ("x1",)), DisturbanceSpec("zero"),
                     [1.0], 3.0)
    assert traj.terminated_at_origin
    assert traj.t_origin == pytest.approx(1.5, abs=1e-3)
    after = traj.times > traj.t_origin
    assert np.all(traj.states[after] == 0) and np.all(traj.u[after] == 0)


def test_blow_up_raises():
    _, m = model_of("ex1")
    with pytest.raises(IntegrationError):
        integrate(m, zero_controller, DisturbanceSpec("zero"), [1.0], 1.0)


def test_integrate_input_checks():
    _, m = model_of("ex1")
    with pytest.raises(ValueError):
        integrate(m, zero_controller, DisturbanceSpec("zero"), [1.0], 0.0)
    with pytest.raises(ValueError):
        integrate(m, zero_controller, DisturbanceSpec("zero"), [1.0, 2.0], 1.0)


def test_start_at_origin():
    _, m = model_of("ex4")
    traj = integrate(m, zero_controller, DisturbanceSpec("zero"), [0.0, 0.0], 1.0)
    assert traj.terminated_at_origin and not np.any(traj.states)


def test_disturbance_kinds():
    _, m = model_of("ex4")
    pd = m.evaluate(np.array([[1.0, 0.5], [0.2, -1.0]]))
    t = np.array([0.3, 1.0])
    s = Disturbance(DisturbanceSpec("sinusoid", amplitude=(2.0,), frequency=3.0, phase=0.1, decay=0.5), m)
    np.testing.assert_allclose(s(t, pd)[:, 0], 2 * np.sin(3 * t + 0.1) * np.exp(-0.5 * t))
    c = Disturbance(DisturbanceSpec("constant", value=(0.7,)), m)
    np.testing.assert_array_equal(c(t, pd), [[0.7], [0.7]])
    cu = Disturbance(DisturbanceSpec("custom", exprs=("t*x1 - x2",)), m)
    np.testing.assert_allclose(cu(t, pd)[:, 0], [0.3 * 1.0 - 0.5, 1.0 * 0.2 + 1.0])
    with pytest.raises(ValueError):
        DisturbanceSpec("gusty")
    with pytest.raises(ValueError):
        DisturbanceSpec("worst_case")
    with pytest.raises(ValueError):
        Disturbance(DisturbanceSpec("constant", value=(1.0, 2.0)), m)


def test_worst_case_quadratic():
    # gamma = 2 s^2, lambda = 2: w* = L2
    L2 = np.array([[0.3], [-1.2], [0.0]])
    np.testing.assert_allclose(worst_case_w(L2, PowerKInfinity(2.0, 2.0), 2.0), L2)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-5, 5), min_size=2, max_size=2),
    st.lists(st.floats(-5, 5), min_size=2, max_size=2),
    st.floats(0.1, 5), st.floats(1.2, 4), st.floats(0.1, 2.0),
)
def test_delta_w_sign(L2, w, a, p, lam):
    g = PowerKInfinity(a, p)
    L2 = np.array([L2])
    ws = worst_case_w(L2, g, lam)

    def scale(w_):
        # magnitude of the individual terms of delta_w
        return 1 + 2 * abs(float(L2[0] @ w_[0])) + lam * lf_transform(g)(2 * np.linalg.norm(L2))

    w = np.array([w])
    assert delta_w(L2, w, g, lam, 2.0)[0] <= 1e-12 * scale(w)
    assert abs(delta_w(L2, ws, g, lam, 2.0)[0]) <= 1e-12 * scale(ws)


def test_ex2_cost_identity():
    b, m = model_of("ex2")
    u = expr_controller(b.exprs["alpha_star"], b.system.variables)
    pieces = CostPieces.from_exprs(b.exprs, b.system.variables, PowerKInfinity(1.0, 2.0))
    traj = integrate(m, u, DisturbanceSpec("custom", exprs=("2*x1",)), [1.0], 5.0, 1e-9)
    cost = evaluate_cost(traj, pieces)
    assert cost.J_T == pytest.approx(2.0, rel=1e-6)
    assert cost.running_J[0] == pytest.approx(2.0)
    assert cost.running_J[-1] == pytest.approx(cost.J_T, rel=1e-6)
    with pytest.raises(ValueError):
        evaluate_cost(traj, pieces, T=6.0)


def test_ex2_l2_gain():
    b, m = model_of("ex2")
    u = expr_controller(b.exprs["alpha_star"], b.system.variables)
    dist = DisturbanceSpec("sinusoid", amplitude=(1.0,), frequency=3.0, decay=0.1)
    traj = integrate(m, u, dist, [1.0], 50.0, 1e-9)
    rep = l2_gain_check(traj, 1.0, 1.0)
    assert rep.passed and rep.w_norm > 0


def test_ex4_cost_identity_short():
    b = builtin_examples()["ex4"]
    ctrl = synthesize(b.system, b.lyapunov, config_from_params(b.params, budget=SphereBudget(samples=1024)))
    rep = cost_identity_check(ctrl, [1.0, 0.5], 5.0)
    assert rep.J_min == pytest.approx(4 * np.sqrt(1 + 0.5**4))
    assert rep.passed, [c.to_dict() for c in rep.checks]
    assert abs(rep.checks[0].J_T - rep.J_min) <= 1e-6 * rep.J_min
