import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate
from scipy.special import gamma, ive

from cooperbound.bzquad import QuadratureError, bz_integral, green_origin


def watson_3d():
    """Closed form of (2 pi)^-3 int dk / (3 - sum cos k_i)."""
    return math.sqrt(6) / 3 / (32 * math.pi ** 3) * gamma(1 / 24) * gamma(5 / 24) * gamma(7 / 24) * gamma(11 / 24)


def bessel_green(D):
    """(2 pi)^-D int dk / E(k) as int_0^inf (e^-t I_0(t))^D dt."""
    val, _ = integrate.quad(lambda t: ive(0, t) ** D, 0, np.inf, limit=500, epsabs=0, epsrel=1e-12)
    return val


def test_green_origin_3d_matches_watson():
    assert green_origin(3) == pytest.approx(4 * watson_3d(), rel=1e-12)


def test_green_origin_4d_matches_bessel_integral():
    assert green_origin(4) == pytest.approx(4 * bessel_green(4), rel=1e-11)


def test_green_origin_refinement_levels_agree():
    assert green_origin(3, level=0) == pytest.approx(green_origin(3, level=1), rel=1e-6)


@pytest.mark.parametrize("D", [1, 2])
def test_green_origin_diverges_in_low_dimension(D):
    with pytest.raises(QuadratureError):
        green_origin(D)


def direct_1d(w, p, lo, hi):
    f = lambda k: np.sin(k * w / 2) ** 2 / (1 - np.cos(k)) ** p
    val, _ = integrate.quad(f, lo, hi, limit=400, epsabs=0, epsrel=1e-12)
    # both signs of k, then 4 (2 pi)^-1
    return 4 * 2 * val / (2 * math.pi)


@pytest.mark.parametrize("w", [1.0, 3.0, 10.0])
@pytest.mark.parametrize("p", [1.0, 2.0])
def test_one_dimensional_against_adaptive_quadrature(w, p):
    (res,) = bz_integral([[w]], 1, p, lo=0.2, hi=math.pi)
    assert res.value == pytest.approx(direct_1d(w, p, 0.2, math.pi), rel=1e-8)


def test_two_dimensional_against_nested_quadrature():
    w = np.array([2.0, 1.0])
    lo, hi = 0.3, 2.5

    def f(k2, k1):
        E = 2 - np.cos(k1) - np.cos(k2)
        return (1 - np.cos(k1 * w[0]) * np.cos(k2 * w[1])) / 2 / E ** 2

    val, _ = integrate.dblquad(f, lo, hi, lo, hi, epsabs=0, epsrel=1e-11)
    # four sign quadrants, 4 (2 pi)^-2
    expected = 4 * 4 * val / (2 * math.pi) ** 2
    (res,) = bz_integral([w], 2, 2.0, lo=lo, hi=hi)
    assert res.value == pytest.approx(expected, rel=1e-8)


@given(st.lists(st.integers(-6, 6), min_size=3, max_size=3))
def test_sign_and_permutation_symmetry(w):
    w = np.array(w, dtype=float)
    a, b, c = bz_integral([w, -w, w[::-1]], 3, 2.0, lo=1e-2)
    assert b.value == pytest.approx(a.value, rel=1e-12, abs=1e-300)
    assert c.value == pytest.approx(a.value, rel=1e-10, abs=1e-300)
    assert a.value >= 0


def test_zero_shift_vanishes_exactly():
    (res,) = bz_integral([[0.0, 0.0, 0.0]], 3)
    assert res.value == 0.0


def test_small_shift_matches_quadratic_limit():
    # sin^2(k.w/2) ~ (k.w)^2 / 4 as w -> 0: S(w) ~ |w|^2 (2 pi)^-D int k_1^2 / E^p
    D, lo = 3, 0.1
    tiny = 1e-4
    (s,) = bz_integral([[tiny, 0, 0]], D, 2.0, lo=lo)
    (s2,) = bz_integral([[2 * tiny, 0, 0]], D, 2.0, lo=lo)
    assert s2.value / s.value == pytest.approx(4.0, rel=1e-6)


def test_input_validation():
    with pytest.raises(ValueError):
        bz_integral([[1.0, 2.0]], 3, lo=0.1)
    with pytest.raises(ValueError):
        bz_integral([[1.0]], 1, lo=2.0, hi=1.0)
    with pytest.raises(QuadratureError):
        bz_integral([[1.0, 0.0]], 2, 2.0, lo=0.0)
