import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from hiopt.lft import PowerKInfinity, check_scaling, lf_transform, young_argmax, young_gap


def numeric_conjugate(g, s):
    """sup_r (s r - g(r)) by bounded scalar search (independent oracle)."""
    r_hi = 10 * (1 + float(g.inverse_derivative(s)))
    res = minimize_scalar(lambda r: -(s * r - g(r)), bounds=(0, r_hi), method="bounded",
                          options={"xatol": 1e-12})
    return -res.fun


def test_quadratic_example():
    # gamma(s) = s^2/mu  ->  l(s) = mu s^2 / 4
    ell = lf_transform(PowerKInfinity.quadratic(0.5))
    assert ell.p == 2
    assert ell(2.0) == pytest.approx(0.5 * 4 / 4, rel=1e-15)


def test_power_example():
    # gamma(s) = s^3: maximizer r = sqrt(s/3), l(s) = 2 (s/3)^(3/2)
    ell = lf_transform(PowerKInfinity(1.0, 3.0))
    assert ell(12.0) == pytest.approx(16.0, rel=1e-14)


@pytest.mark.parametrize("a,p", [(1.0, 2.0), (0.3, 2.0), (2.0, 1.5), (1.0, 4.0)])
@pytest.mark.parametrize("s", [0.1, 1.0, 7.0])
def test_matches_numeric_sup(a, p, s):
    g = PowerKInfinity(a, p)
    assert lf_transform(g)(s) == pytest.approx(numeric_conjugate(g, s), rel=1e-7)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-2, 1e2), st.floats(1.1, 6.0), st.floats(1e-3, 1e2))
def test_involution(a, p, s):
    g = PowerKInfinity(a, p)
    back = lf_transform(lf_transform(g))
    assert back.p == pytest.approx(p, rel=1e-12)
    assert back(s) == pytest.approx(g(s), rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(1e-2, 10),
    st.floats(1.2, 4.0),
    st.lists(st.floats(-10, 10), min_size=2, max_size=2),
    st.lists(st.floats(-10, 10), min_size=2, max_size=2),
)
def test_young_gap_nonnegative(a, p, u, v):
    g = PowerKInfinity(a, p)
    scale = 1 + g(np.linalg.norm(u)) + lf_transform(g)(np.linalg.norm(v))
    assert young_gap(g, u, v) >= -1e-12 * scale


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-2, 10), st.floats(1.2, 4.0), st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_young_equality_at_argmax(a, p, v):
    g = PowerKInfinity(a, p)
    u = young_argmax(g, v)
    scale = 1 + abs(float(np.dot(u, v)))
    assert abs(young_gap(g, u, v)) <= 1e-10 * scale


def test_argmax_zero():
    np.testing.assert_array_equal(young_argmax(PowerKInfinity(1, 2), [0.0, 0.0]), [0.0, 0.0])


def test_young_gap_shape_mismatch():
    with pytest.raises(ValueError):
        young_gap(PowerKInfinity(1, 2), [1.0], [1.0, 2.0])


def test_scaling_only_quadratic():
    assert check_scaling(PowerKInfinity(1.0, 2.0))
    assert check_scaling(PowerKInfinity(0.25, 2.0))
    assert not check_scaling(PowerKInfinity(1.0, 3.0))
    assert not check_scaling(PowerKInfinity(1.0, 1.5))


@pytest.mark.parametrize("a,p", [(0.0, 2.0), (-1.0, 2.0), (1.0, 1.0), (1.0, 0.5), (np.inf, 2.0)])
def test_invalid(a, p):
    with pytest.raises(ValueError):
        PowerKInfinity(a, p)


def test_helpers():
    g = PowerKInfinity(2.0, 3.0)
    assert g.derivative(2.0) == pytest.approx(24.0)
    assert g.inverse_derivative(g.derivative(1.7)) == pytest.approx(1.7)
    assert g.scaled(3)(2.0) == pytest.approx(3 * g(2.0))
    assert g.compose_scale(0.5)(2.0) == pytest.approx(g(1.0))
