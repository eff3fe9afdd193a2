import math

import numpy as np
import pytest
import scipy.integrate as si

from boltzslab.special_functions import (
    EULER_GAMMA,
    e1_bounds,
    e1_series,
    e1_sum_only,
    exp_integral_E1,
    exp_integral_En,
    h_kernel,
    _e1_series_full,
    _e1_continued_fraction,
)


def e1_quad_oracle(x: float) -> float:
    """Adaptive quadrature of the defining integral (independent route)."""
    upper = max(60.0, x + 40.0)
    val, err = si.quad(lambda t: math.exp(-t) / t, x, upper,
                       epsabs=0.0, epsrel=1e-13, limit=400)
    return val


def test_oracle_against_mpmath_spot_checks():
    # the quadrature oracle itself is cross-checked against high-precision
    # tanh-sinh integration at a few points before it is trusted
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 30
    for x in (1e-6, 1e-3, 0.5, 1.0, 5.0, 30.0):
        ref = float(mp.quad(lambda t: mp.e**(-t) / t, [x, mp.inf]))
        assert abs(e1_quad_oracle(x) - ref) <= 1e-12 * abs(ref)


def test_e1_reference_value():
    # frozen from the quadrature oracle: E1(1) = 0.21938393439552026...
    r = exp_integral_E1(1.0)
    assert abs(r.value - 0.2193839343955203) < 1e-12
    assert r.branch == "series"
    assert r.est_error <= 1e-12 * max(abs(r.value), 1e-300)


@pytest.mark.parametrize("x", list(np.geomspace(1e-6, 50, 60)))
def test_e1_matches_quadrature(x):
    r = exp_integral_E1(float(x))
    ref = e1_quad_oracle(float(x))
    assert abs(r.value - ref) <= 1e-12 * abs(ref)


def test_e1_small_argument_expansion():
    # E1(x) ~ -gamma - ln x + x - ... ; at x = 1e-8 the remainder after the
    # log/constant terms is below 2e-8
    x = 1e-8
    r = exp_integral_E1(x)
    assert abs(r.value + math.log(x) + EULER_GAMMA) <= 2e-8


def test_e1_domain_and_underflow():
    with pytest.raises(ValueError):
        exp_integral_E1(0.0)
    with pytest.raises(ValueError):
        exp_integral_E1(-1.0)
    r = exp_integral_E1(800.0)
    assert r.value == 0.0 and r.underflow


def test_e1_strictly_decreasing_and_positive():
    xs = np.geomspace(1e-6, 50, 1000)
    vals = [exp_integral_E1(float(x)).value for x in xs]
    assert all(v > 0 for v in vals)
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_branch_consistency_near_switch():
    for x in np.linspace(0.9, 1.1, 11):
        s, _ = _e1_series_full(float(x))
        c, _ = _e1_continued_fraction(float(x))
        assert abs(s - c) <= 1e-11 * abs(s)


def test_e1_series_matches_e1():
    assert abs(e1_series(1.0, 30) - exp_integral_E1(1.0).value) <= 1e-12


def test_e1_series_sum_small_x():
    # direct arithmetic: x - x^2/4 + x^3/18 - x^4/96 + x^5/600 at x = 0.01
    x = 0.01
    expected = x - x**2 / 4 + x**3 / 18 - x**4 / 96 + x**5 / 600
    assert abs(e1_sum_only(x, 5) - expected) < 1e-15
    assert abs(expected - 0.0099750554515556) < 1e-12


def test_e1_series_domain():
    with pytest.raises(ValueError):
        e1_series(1.5, 10)
    with pytest.raises(ValueError):
        e1_series(0.0, 10)


@pytest.mark.parametrize("x,n", [(0.3, 4), (0.7, 6), (1.0, 8), (1.0, 20)])
def test_series_alternating_tail_bound(x, n):
    exact = exp_integral_E1(x).value
    part = e1_series(x, n)
    bound = x ** (n + 1) / ((n + 1) * math.factorial(n + 1))
    assert abs(exact - part) <= bound * (1 + 1e-12) + 1e-15


def test_e1_bounds_values():
    # direct evaluation of (1/2) e^-1 ln 3 and e^-1 ln 2
    lo, hi = e1_bounds(1.0)
    assert abs(lo - 0.5 * math.exp(-1) * math.log(3.0)) < 1e-15
    assert abs(hi - math.exp(-1) * math.log(2.0)) < 1e-15
    assert abs(lo - 0.20207843740965173) < 1e-12
    assert abs(hi - 0.25499459743395353) < 1e-12


def test_e1_bounds_sandwich_and_order():
    xs = np.geomspace(1e-6, 50, 1000)
    for x in xs:
        lo, hi = e1_bounds(float(x))
        v = exp_integral_E1(float(x)).value
        assert lo < v < hi
        assert lo < hi
    with pytest.raises(ValueError):
        e1_bounds(0.0)


def test_e1_log_asymptotics():
    x = 1e-6
    ratio = exp_integral_E1(x).value / (-math.log(x))
    assert 0.95 <= ratio <= 1.05


def test_en_values_and_recurrence():
    assert exp_integral_En(2, 0.0) == 1.0
    assert exp_integral_En(3, 0.0) == 0.5
    for n in (2, 3):
        for x in (0.05, 0.7, 3.0, 20.0):
            ref, _ = si.quad(lambda t: math.exp(-x * t) / t**n, 1.0, np.inf,
                             epsabs=0.0, epsrel=1e-12, limit=200)
            assert abs(exp_integral_En(n, x) - ref) <= 1e-10 * max(abs(ref), 1e-300)
    with pytest.raises(ValueError):
        exp_integral_En(1, 0.0)


def h_quad_oracle(z, x, nor):
    val, _ = si.quad(lambda u: -math.exp(-nor * x / u) / u, z, 1.0,
                     epsabs=0.0, epsrel=1e-12)
    return val


def test_h_kernel_contracts():
    assert h_kernel(1.0, 5.0, 1.0) == 0.0
    assert abs(h_kernel(0.37, 0.0, 2.0) - math.log(0.37)) < 1e-15
    v = h_kernel(0.1, 0.5, 1.0)
    assert v <= 0.0
    assert abs(v) <= abs(math.log(0.1))
    assert abs(v - h_quad_oracle(0.1, 0.5, 1.0)) < 1e-11


@pytest.mark.parametrize("z,x,nor", [(0.2, 0.3, 1.0), (0.05, 2.0, 0.5),
                                     (0.9, 1e-3, 4.0), (0.5, 10.0, 2.0)])
def test_h_kernel_vs_quadrature(z, x, nor):
    assert abs(h_kernel(z, x, nor) - h_quad_oracle(z, x, nor)) < 1e-11


def test_h_kernel_z_derivative():
    # d/dz H(z, x) = exp(-nor x / z)/z, checked by centered differences
    nor, x = 1.3, 0.7
    for z in (0.2, 0.5, 0.9):
        h = 1e-6
        fd = (h_kernel(z + h, x, nor) - h_kernel(z - h, x, nor)) / (2 * h)
        exact = math.exp(-nor * x / z) / z
        assert abs(fd - exact) <= 1e-6 * abs(exact)


def test_h_kernel_domains():
    with pytest.raises(ValueError):
        h_kernel(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        h_kernel(1.2, 1.0, 1.0)
    with pytest.raises(ValueError):
        h_kernel(0.5, -1.0, 1.0)
    with pytest.raises(ValueError):
        h_kernel(0.5, 1.0, 0.0)
