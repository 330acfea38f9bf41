import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.special import lambertw as scipy_lambertw

from uavwpt.errors import BracketingError, NumericDomainError
from uavwpt.numerics import bisect_root, integrate_adaptive, lambert_w0


def test_lambert_identity_points():
    assert lambert_w0(0.0) == 0.0
    assert lambert_w0(math.e) == pytest.approx(1.0, abs=1e-14)
    assert lambert_w0(-1.0 / math.e) == pytest.approx(-1.0, abs=1e-12)


def test_lambert_matches_scipy_across_range():
    # independent oracle: scipy's lambertw, principal branch
    xs = np.concatenate([
        -np.exp(-1.0) + np.logspace(-12, -0.5, 40),
        np.logspace(-10, 8, 60),
        [-0.1, -0.01, 0.5, 2.0, 700.0],
    ])
    for x in xs:
        expect = float(scipy_lambertw(float(x)).real)
        got = lambert_w0(float(x))
        # near the branch point both sides lose digits to the e*x + 1
        # cancellation, so 1e-9 is as tight as a fair comparison gets
        assert got == pytest.approx(expect, rel=1e-9, abs=1e-10)


def test_lambert_below_branch_raises():
    with pytest.raises(NumericDomainError):
        lambert_w0(-1.0 / math.e - 1e-6)


@given(st.floats(min_value=-0.999, max_value=700.0))
def test_lambert_inverse_identity(w):
    # W(w e^w) = w on the principal branch for w >= -1
    x = w * math.exp(w)
    got = lambert_w0(x)
    assert got == pytest.approx(w, rel=1e-9, abs=1e-9)


def test_bisect_linear():
    assert bisect_root(lambda x: x - 2.0, 0.0, 10.0) == pytest.approx(2.0)


def test_bisect_sqrt2():
    root = bisect_root(lambda x: x * x - 2.0, 0.0, 2.0, tol=1e-12)
    assert root == pytest.approx(math.sqrt(2.0), abs=1e-10)


def _secant(f, x0, x1, iters=100):
    # deliberately different algorithm, used as the reference
    f0, f1 = f(x0), f(x1)
    for _ in range(iters):
        if f1 == f0:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        x0, f0 = x1, f1
        x1, f1 = x2, f(x2)
    return x1


def test_bisect_agrees_with_secant_on_monotone_cubics():
    rng = np.random.default_rng(11)
    for _ in range(100):
        r = float(rng.uniform(-5.0, 5.0))
        c = float(rng.uniform(0.1, 4.0))

        def f(x, r=r, c=c):
            return (x - r) ** 3 + c * (x - r)

        got = bisect_root(f, r - 7.0, r + 9.0, tol=1e-12)
        ref = _secant(f, r - 1.0, r + 2.0)
        assert got == pytest.approx(ref, abs=1e-8)


def test_bisect_expands_bracket_upward():
    # root far beyond the initial hi; the doubling expansion must find it
    root = bisect_root(lambda x: x - 500.0, 0.0, 1.0, tol=1e-10)
    assert root == pytest.approx(500.0, abs=1e-6)


def test_bisect_no_root_raises():
    with pytest.raises(BracketingError):
        bisect_root(lambda x: x * x + 1.0, 0.0, 1.0, max_expansions=8)


def test_integrate_constant_and_linear():
    assert integrate_adaptive(lambda x: 1.0, 0.0, 1.0) == pytest.approx(1.0)
    assert integrate_adaptive(lambda x: x, 0.0, 1.0) == pytest.approx(0.5)


def test_integrate_arctan_antiderivative():
    # inverse-square family: the closed form is an arctan difference
    A, c, D = 10.0, 4.0, 37.0

    def f(x):
        return 1.0 / ((x + c) ** 2 + A * A)

    expect = (math.atan((D + c) / A) - math.atan(c / A)) / A
    got = integrate_adaptive(f, 0.0, D, rel_tol=1e-11)
    assert got == pytest.approx(expect, rel=1e-9)


def test_integrate_matches_scipy_quad():
    def f(x):
        return math.exp(-x * x) * math.cos(3.0 * x)

    expect, _ = quad(f, -2.0, 5.0, epsabs=1e-13, epsrel=1e-13)
    got = integrate_adaptive(f, -2.0, 5.0, rel_tol=1e-10)
    assert got == pytest.approx(expect, rel=1e-8)


@given(st.floats(min_value=0.05, max_value=50.0),
       st.floats(min_value=-40.0, max_value=40.0))
def test_integrate_inverse_square_property(c_perp, offset):
    # leg-average integrand used throughout the channel model
    def f(x):
        return 1.0 / ((x - offset) ** 2 + c_perp * c_perp)

    got = integrate_adaptive(f, 0.0, 25.0, rel_tol=1e-10)
    expect = (math.atan((25.0 - offset) / c_perp)
              - math.atan(-offset / c_perp)) / c_perp
    assert got == pytest.approx(expect, rel=1e-8)
