"""End-to-end acceptance suite: one test per criterion, each printing a
PASS/FAIL line with the measured values and runtime."""

import time

import numpy as np
import pytest

from hiopt.expr import Compiled, diff, parse
from hiopt.homogeneity import SphereBudget, check_homogeneous
from hiopt.lft import PowerKInfinity, lf_transform, young_argmax, young_gap
from hiopt.sim import (
    CostPieces,
    DisturbanceSpec,
    cost_identity_check,
    evaluate_cost,
    expr_controller,
    integrate,
    l2_gain_check,
    output_energy,
    synthesized_controller,
)
from hiopt.synthesis import config_from_params, synthesize
from hiopt.sysdef import SystemModel, builtin_examples
from hiopt.verify import (
    check_ios_dissipation,
    check_iss_dissipation,
    check_pd_on_sphere,
    gain_margin_sweep,
    ios_gains,
)

EX4_TARGETS = {
    "rho1": (0.66, 0.05), "rho2": (0.24, 0.05), "rho3": (0.42, 0.05), "rho4": (0.37, 0.05),
    "rho": (2.18, 0.05), "kappa_c": (0.36, 0.05), "kappa1": (10.55, 0.3),
}


@pytest.fixture
def report(capsys):
    def emit(n, name, ok, detail, seconds, limit):
        with capsys.disabled():
            print(f"\nCRITERION {n:2d} [{'PASS' if ok else 'FAIL'}] {name}: {detail} "
                  f"({seconds:.2f}s, limit {limit}s)")

    return emit


@pytest.fixture(scope="module")
def ex4_ctrl():
    b = builtin_examples()["ex4"]
    t0 = time.perf_counter()
    ctrl = synthesize(b.system, b.lyapunov,
                      config_from_params(b.params, budget=SphereBudget(samples=16384)))
    return ctrl, time.perf_counter() - t0


def ex_model(name):
    b = builtin_examples()[name]
    return b, SystemModel(b.system, b.lyapunov)


def test_criterion_01_ex1_closed_form(report):
    t0 = time.perf_counter()
    b, m = ex_model("ex1")
    u = expr_controller(b.exprs["alpha_star"], b.system.variables)
    traj = integrate(m, u, DisturbanceSpec("zero"), [1.0], 10.0, 1e-9)
    err = np.max(np.abs(traj.states[:, 0] - 1 / np.sqrt(1 + 10 * traj.times)))
    e_err = abs(output_energy(traj)[-1] - np.log(101) / 10)
    dt = time.perf_counter() - t0
    ok = err <= 1e-6 and e_err <= 1e-4 and dt < 1
    report(1, "Example 1 closed form", ok,
           f"max abs error {err:.2e}, int y^2 error {e_err:.2e}", dt, 1)
    assert err <= 1e-6 and e_err <= 1e-4
    assert dt < 1


def test_criterion_02_ex2_dissipation(report):
    t0 = time.perf_counter()
    b, m = ex_model("ex2")
    rng = np.random.default_rng(42)
    x = rng.uniform(-3, 3, 10_000)
    w = rng.uniform(-3, 3, 10_000)
    pd = m.evaluate(x[:, None])
    u = b.compiled("alpha_star")(x[:, None])
    vdot = pd.LfV + pd.L1 * u + pd.L2[:, 0] * w
    viol = int(np.sum(vdot > -3 * x**4 - 1.5 * x**2 + w**2))
    dt = time.perf_counter() - t0
    report(2, "Example 2 dissipation", viol == 0 and dt < 1, f"{viol} violations / 10^4", dt, 1)
    assert viol == 0
    assert dt < 1


def test_criterion_03_ex2_cost_identity(report):
    t0 = time.perf_counter()
    b, m = ex_model("ex2")
    u = expr_controller("-4*x1^3 - 2.5*x1", ("x1",))
    pieces = CostPieces.from_exprs(b.exprs, ("x1",), PowerKInfinity(1.0, 2.0))
    worst = 0.0
    for x0 in (0.5, 1.0, 2.0):
        for T in (1.0, 5.0, 20.0):
            traj = integrate(m, u, DisturbanceSpec("custom", exprs=("2*x1",)), [x0], T, 1e-9)
            J = evaluate_cost(traj, pieces).J_T
            worst = max(worst, abs(J - 2 * x0**2) / (2 * x0**2))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-6 and dt < 2
    report(3, "Example 2 cost identity", ok, f"max |J_T - 2x0^2| per unit {worst:.2e}", dt, 2)
    assert worst <= 1e-6
    assert dt < 2


def test_criterion_04_ex2_l2_gain(report):
    t0 = time.perf_counter()
    b, m = ex_model("ex2")
    u = expr_controller(b.exprs["alpha_star"], ("x1",))
    dist = DisturbanceSpec("sinusoid", amplitude=(1.0,), frequency=3.0, decay=0.1)
    traj = integrate(m, u, dist, [1.0], 50.0, 1e-9)
    rep = l2_gain_check(traj, 1.0, 1.0, tol=1e-6)
    dt = time.perf_counter() - t0
    report(4, "Example 2 L2 gain", rep.passed and dt < 1,
           f"||y||={rep.y_norm:.6f} <= ||w||+1={rep.bound:.6f}", dt, 1)
    assert rep.y_norm <= rep.w_norm + 1 + 1e-6
    assert dt < 1


def test_criterion_05_ex4_constants(report, ex4_ctrl):
    ctrl, dt = ex4_ctrl
    c = ctrl.constants
    misses = []
    for key, (target, tol) in EX4_TARGETS.items():
        v = getattr(c, key)
        if v is None or abs(v - target) > tol:
            misses.append(f"{key}={v:.4f} vs {target}")
    ok = not misses and dt < 30
    detail = "all within tolerance" if not misses else "outside tolerance: " + ", ".join(misses)
    report(5, "Example 4 sphere constants", ok, detail, dt, 30)
    assert dt < 30
    for key, (target, tol) in EX4_TARGETS.items():
        assert getattr(c, key) == pytest.approx(target, abs=tol), key


def test_criterion_06_ex4_positive_definite(report, ex4_ctrl):
    ctrl, _ = ex4_ctrl
    t0 = time.perf_counter()
    bud = SphereBudget(samples=4096)
    norm = ctrl.model.norm
    H = check_pd_on_sphere(ctrl.H_kappa, norm, 2.0, bud, name="H11")
    l = check_pd_on_sphere(ctrl.l, norm, 2.0, bud, name="l")
    dt = time.perf_counter() - t0
    ok = H.passed and l.passed and dt < 30
    report(6, "Example 4 positive definiteness", ok,
           f"min H11={H.value:.4f}, min l={l.value:.4f}", dt, 30)
    assert H.value > 0 and l.value > 0
    assert dt < 30


def test_criterion_07_ex4_cost_identity(report, ex4_ctrl):
    ctrl, _ = ex4_ctrl
    t0 = time.perf_counter()
    rep = cost_identity_check(ctrl, [1.0, 0.5], 20.0)
    dt = time.perf_counter() - t0
    J4V = 4 * np.sqrt(1 + 0.5**4)
    a = rep.checks[0]
    ok = rep.passed and dt < 5
    report(7, "Example 4 cost identity", ok,
           f"4V(x0)={J4V:.6f}; " + ", ".join(f"{c.name}={c.J_T:.6f}" for c in rep.checks), dt, 5)
    assert rep.J_min == pytest.approx(J4V, rel=1e-14)
    assert abs(a.J_T - J4V) <= 1e-3 * J4V
    for c in rep.checks[1:3]:
        assert c.J_T <= J4V + rep.tol, c.name
    for c in rep.checks[3:]:
        assert c.J_T >= J4V - rep.tol, c.name
    assert dt < 5


def test_criterion_08_ex4_iss_ios(report, ex4_ctrl):
    ctrl, _ = ex4_ctrl
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    X = rng.uniform(-3, 3, (10_000, 2))
    W = rng.uniform(-3, 3, (10_000, 1))
    iss = check_iss_dissipation(ctrl, X, W)
    ios = check_ios_dissipation(ctrl, X, W, [1.0, 0.5])
    g = ios_gains(ctrl, [1.0, 0.5])
    dist = DisturbanceSpec("sinusoid", amplitude=(1.0,), frequency=3.0, decay=0.1)
    traj = integrate(ctrl.model, synthesized_controller(ctrl), dist, [1.0, 0.5], 20.0, 1e-9)
    l2 = l2_gain_check(traj, g["kappa_L"], g["c0"])
    dt = time.perf_counter() - t0
    ok = iss.passed and ios.passed and l2.passed and dt < 10
    report(8, "Example 4 ISS/IOS", ok,
           f"ISS violations {iss.details['violations']}, IOS violations "
           f"{ios.details['violations']}, ||y||={l2.y_norm:.4f} <= {l2.bound:.4f} "
           f"(rho_m={g['rho_m']:.4f})", dt, 10)
    assert iss.passed and ios.passed and l2.passed
    assert dt < 10


def test_criterion_09_ex3_negative_certificate(report):
    t0 = time.perf_counter()
    b, m = ex_model("ex3")
    rep = check_pd_on_sphere(b.compiled("l_tilde"), m.norm, 6.0)
    witness = b.compiled("l_tilde")(np.array([rep.point]))[0]
    dt = time.perf_counter() - t0
    ok = (not rep.passed) and witness < -0.1 and dt < 5
    report(9, "Example 3 negative certificate", ok,
           f"check failed as required, witness {np.round(rep.point, 6).tolist()} "
           f"with l_tilde={witness:.6f}", dt, 5)
    assert not rep.passed
    assert witness < -0.1
    assert dt < 5


def test_criterion_10_gain_margin(report, ex4_ctrl):
    ctrl, _ = ex4_ctrl
    t0 = time.perf_counter()
    res = {r.gain: r for r in gain_margin_sweep(ctrl, [0.4, 0.6, 1.0, 5.0])}
    dt = time.perf_counter() - t0
    ok = all(res[g].min_decrease > 0 for g in (0.6, 1.0, 5.0)) and dt < 10
    report(10, "Gain margin sweep", ok,
           ", ".join(f"g={g:g}: {r.min_decrease:.4f}" for g, r in res.items())
           + " (g=0.4 reported only)", dt, 10)
    for g in (0.6, 1.0, 5.0):
        assert res[g].min_decrease > 0
    assert res[0.4].passed is None
    assert dt < 10


def test_criterion_11_property_suites(report, ex4_ctrl):
    ctrl, _ = ex4_ctrl
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    results = {}

    # Legendre-Fenchel involution
    errs = []
    for _ in range(200):
        g = PowerKInfinity(rng.uniform(0.05, 20), rng.uniform(1.2, 5))
        s = rng.uniform(0, 10, 20)
        gg = lf_transform(lf_transform(g))
        errs.append(np.max(np.abs(gg(s) - g(s)) / np.maximum(np.abs(g(s)), 1e-300)))
    results["lf involution"] = max(errs) <= 1e-12

    # Young gap
    gaps_ok, eq_ok = True, True
    for _ in range(500):
        g = PowerKInfinity(rng.uniform(0.05, 20), rng.uniform(1.2, 5))
        a, bv = rng.normal(size=3), rng.normal(size=3)
        scale = 1 + g(np.linalg.norm(a)) + lf_transform(g)(np.linalg.norm(bv))
        gaps_ok &= young_gap(g, a, bv) >= -1e-12 * scale
        am = young_argmax(g, bv)
        eq_ok &= abs(young_gap(g, am, bv)) <= 1e-10 * (1 + abs(am @ bv))
    results["young gap"] = bool(gaps_ok and eq_ok)

    # degree ledger of the synthesized objects
    D = ctrl.sys.dilation
    ledger = [(ctrl.phi, 2.0), (ctrl.H_kappa, 2.0), (ctrl.l, 2.0), (ctrl.l_bar, 2.0),
              (ctrl.M, 2.0), (ctrl.M1, 2.0), (ctrl.alpha_s, 1.0), (ctrl.alpha, 1.0),
              (ctrl.alpha_star, 1.0), (ctrl.R, 0.0)]
    deg_ok = all(check_homogeneous(f, d, D, tol=1e-6).passed for f, d in ledger)
    deg_ok &= check_homogeneous(ctrl.f_tilde, 0.0, D, tol=1e-6, vector_field=True).passed
    results["degree ledger"] = bool(deg_ok)

    # algebraic cost identity with y = h + d u
    X = rng.uniform(-3, 3, (1000, 2))
    u = rng.normal(scale=3, size=1000)
    p = ctrl.pieces(X)
    y = p.pd.h + np.outer(u, ctrl.sys.d_vec)
    lhs = p.l + u**2 * ctrl.R1(X) + np.sum(y * y, axis=1) * ctrl.R2(X)
    rhs = p.l_bar + 2 * ctrl.theta**2 / ctrl.kappa * u**2 * p.R
    results["cost identity"] = bool(np.all(np.abs(lhs - rhs) <= 1e-9 * np.abs(rhs)))

    # symbolic derivatives against central differences
    fd_ok = True
    names = ("x1", "x2")
    Y = rng.uniform(0.1, 2, (100, 2)) * rng.choice([-1, 1], (100, 2))
    for text in ("(apow(x1, 4/3) + x2^4)^(1/2)", "spow(x1, 1/3)*x2^3 - abs(x1)*sqrt(x1^2 + x2^2)"):
        e = parse(text)
        f = Compiled(e, names)
        for j, v in enumerate(names):
            h = np.zeros(2)
            h[j] = 1e-6
            fd = (f(Y + h) - f(Y - h)) / 2e-6
            sym = Compiled(diff(e, v), names)(Y)
            fd_ok &= bool(np.all(np.abs(sym - fd) <= 1e-6 * np.maximum(np.abs(fd), 1e-2)))
    results["symbolic derivatives"] = fd_ok

    dt = time.perf_counter() - t0
    ok = all(results.values()) and dt < 10
    report(11, "Property suites", ok,
           ", ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in results.items()), dt, 10)
    assert all(results.values()), results
    assert dt < 10
