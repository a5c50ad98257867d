import numpy as np
import pytest

from hiopt.homogeneity import Dilation, HomogeneousNorm, SphereBudget, homo_norm, sphere_points
from hiopt.lft import PowerKInfinity
from hiopt.synthesis import config_from_params, synthesize
from hiopt.sysdef import SystemModel, builtin_examples
from hiopt.verify import (
    HomogeneityPrecheckError,
    check_dissipation,
    check_ios_dissipation,
    check_iss_dissipation,
    check_pd_on_sphere,
    closed_loop_vdot,
    gain_margin_sweep,
    hji_residual,
    ios_gains,
)


@pytest.fixture(scope="module")
def ex4():
    b = builtin_examples()["ex4"]
    return synthesize(b.system, b.lyapunov, config_from_params(b.params, budget=SphereBudget(samples=2048)))


def box(m, dim, seed):
    return np.random.default_rng(seed).uniform(-3, 3, (m, dim))


def test_pd_constant_on_sphere():
    g = HomogeneousNorm(Dilation((3.0, 1.0)), 4.0)
    rep = check_pd_on_sphere(lambda X: homo_norm(g, X) ** 2, g, 2.0, SphereBudget(samples=256))
    assert rep.passed
    assert rep.value == pytest.approx(1.0, abs=1e-12)


def test_pd_negative_witness_ex3():
    b = builtin_examples()["ex3"]
    g = SystemModel(b.system, b.lyapunov).norm
    rep = check_pd_on_sphere(b.compiled("l_tilde"), g, 6.0)
    assert not rep.passed
    assert rep.value == pytest.approx(2 * (np.sqrt(2) - 1) - 1, abs=1e-6)
    assert b.compiled("l_tilde")(np.array([rep.point]))[0] < -0.1


def test_pd_precheck():
    g = HomogeneousNorm(Dilation((1.0, 1.0)), 2.0)
    with pytest.raises(HomogeneityPrecheckError):
        check_pd_on_sphere(lambda X: X[:, 0] ** 2 + X[:, 1], g, 2.0)
    with pytest.raises(HomogeneityPrecheckError):
        check_pd_on_sphere(lambda X: np.ones(len(X)), g, 0.0)


def test_check_dissipation_basic():
    lhs = np.array([0.0, 1.0, 2.0])
    pts = np.arange(6.0).reshape(3, 2)
    ok = check_dissipation("t", lhs, lhs + 1e-3, np.ones(3), pts)
    assert ok.passed and ok.details["violations"] == 0
    bad = check_dissipation("t", lhs, lhs - [0, 0, 1], np.ones(3), pts)
    assert not bad.passed and bad.point == [4.0, 5.0] and bad.details["violations"] == 1


def test_iss_ex4(ex4):
    X, W = box(10_000, 2, 1), box(10_000, 1, 2)
    rep = check_iss_dissipation(ex4, X, W)
    assert rep.passed
    assert rep.details["c1"] == ex4.constants.aux_decrease


def test_iss_w0_on_sphere(ex4):
    P, _ = sphere_points(ex4.model.norm, 4096)
    vdot, _ = closed_loop_vdot(ex4, P, np.zeros((len(P), 1)))
    assert np.all(vdot <= -ex4.constants.aux_decrease * (1 - 1e-6))


def test_iss_detects_overclaimed_rate(ex4):
    X, W = box(2000, 2, 3), np.zeros((2000, 1))
    rep = check_iss_dissipation(ex4, X, W, c1=10 * ex4.constants.aux_decrease)
    assert not rep.passed and rep.details["violations"] > 0


def test_ios_ex4(ex4):
    X, W = box(10_000, 2, 4), box(10_000, 1, 5)
    rep = check_ios_dissipation(ex4, X, W, x0=[1.0, 0.5])
    assert rep.passed
    mu = 1 / ex4.gamma.a
    rho_m = ex4.constants.rho_m
    assert rep.details["kappa_L"] == pytest.approx(np.sqrt(11 * 2 / (4 * rho_m * mu)))
    V0 = np.sqrt(1 + 0.5**4)
    assert rep.details["c0"] == pytest.approx(np.sqrt(11 * 2 * V0 / rho_m))


def test_ios_gains_without_x0(ex4):
    g = ios_gains(ex4)
    assert "c0" not in g and g["kappa_L"] > 0


def test_hji_residual_ex2():
    # hand evaluation at x = 1: 1 + 4 - 3.25/8 + 1 + 1/4
    b = builtin_examples()["ex2"]
    pd = SystemModel(b.system, b.lyapunov).evaluate([[1.0]])
    x = np.array([[1.0]])
    r = hji_residual(pd.LfV, pd.L1, pd.L2, pd.h, b.compiled("l")(x), b.compiled("R1")(x),
                     b.compiled("R2")(x), PowerKInfinity(1.0, 2.0))
    assert r[0] == pytest.approx(5.84375, rel=1e-14)


def test_gain_margin(ex4):
    res = gain_margin_sweep(ex4, [0.4, 0.6, 1.0, 5.0], SphereBudget(samples=1024))
    by = {r.gain: r for r in res}
    assert not by[0.4].asserted and by[0.4].passed is None
    for g in (0.6, 1.0, 5.0):
        assert by[g].asserted and by[g].passed and by[g].min_decrease > 0
    with pytest.raises(ValueError):
        gain_margin_sweep(ex4, [0.0])
