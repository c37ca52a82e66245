import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cooperbound.lattice import LatticeSpec, UnsupportedGeometryError
from cooperbound.twist import (CutoffError, build_twist, finite_volume_twist_bound, lattice_g, log_twist_bound,
                               tilde_laplacian_closed, wavenumber_grid)


def direct_twist(q, u, eps, K, lat, p=2.0):
    """O(sites x modes) evaluation of (2q/|Lambda|) sum_M sin(k.x) sin(k.u) / E^p."""
    k = wavenumber_grid(lat.L, eps, K, lat.dim)
    E = np.sum(1 - np.cos(k), axis=1)
    su = np.sin(k @ np.asarray(u, dtype=float))
    sx = np.sin(lat.sites @ k.T)
    return 2 * q / lat.n_sites * sx @ (su / E ** p)


sites = st.tuples(st.integers(1, 3), st.integers(1, 3)).flatmap(
    lambda LD: st.tuples(st.just(LD), st.lists(st.integers(-LD[0], LD[0]), min_size=LD[1], max_size=LD[1])))


@given(sites, st.floats(0.05, 2.0), st.sampled_from([1e-3, 0.5, 1.0]), st.sampled_from([1.0, 2.0]))
def test_fft_twist_matches_direct_sum(case, q, eps, p):
    (L, D), u = case
    lat = LatticeSpec.symmetric(L, D)
    try:
        tw = build_twist(q, u, eps, math.pi, lat, exponent=p)
    except CutoffError:
        return
    np.testing.assert_allclose(tw.phi, direct_twist(q, u, eps, math.pi, lat, p), rtol=1e-10, atol=1e-12)
    assert tw.residue < 1e-10


@given(sites, st.floats(0.05, 2.0))
def test_twist_is_odd_under_reflection(case, q):
    (L, D), u = case
    lat = LatticeSpec.symmetric(L, D)
    tw = build_twist(q, u, 1e-3, math.pi, lat)
    refl = np.array([lat.index(lat.reflect(x)) for x in lat.sites])
    np.testing.assert_allclose(tw.phi[refl], -tw.phi, atol=1e-12)


@pytest.mark.parametrize("L,D,u", [(3, 1, (2,)), (2, 2, (1, -2)), (2, 3, (1, 0, 2))])
def test_closed_tilde_laplacian_matches_periodic_stencil(L, D, u):
    lat = LatticeSpec.symmetric(L, D)
    tw = build_twist(0.8, u, 1e-3, 2.5, lat)
    np.testing.assert_allclose(tilde_laplacian_closed(tw), lat.laplacian_periodic(tw.phi), atol=1e-12)


def test_phi_is_read_only():
    tw = build_twist(1.0, (1,), 1e-3, math.pi, LatticeSpec.symmetric(2, 1))
    with pytest.raises(ValueError):
        tw.phi[0] = 1.0


def test_rejects_boxes_and_empty_cutoffs():
    with pytest.raises(UnsupportedGeometryError):
        build_twist(1.0, (1, 1), 1e-3, math.pi, LatticeSpec.box((2, 2)))
    with pytest.raises(CutoffError):
        build_twist(1.0, (1,), 2.0, 1.0, LatticeSpec.symmetric(1, 1))
    with pytest.raises(CutoffError):
        wavenumber_grid(1, 2.5, 3.0, 1)


@pytest.mark.parametrize("u,v", [((1, 2), (1, 2)), ((2, -1), (0, 1)), ((1, 0), (-2, 2))])
def test_twist_differences_reproduce_g(u, v):
    lat = LatticeSpec.symmetric(2, 2)
    q = 0.7
    tw = build_twist(q, u, 1e-3, math.pi, lat)
    gu, guv = lattice_g(lat, u, v, 1e-3)
    du = tw.at(u) - tw.at(lat.reflect(u))
    dv = tw.at(v) - tw.at(lat.reflect(v))
    assert du == pytest.approx(q * gu, rel=1e-12)
    assert du - dv == pytest.approx(q * guv, rel=1e-10, abs=1e-12)


def test_lattice_g_is_a_midpoint_rule_for_the_continuum_integral():
    # with the cutoff on a cell edge the grid sum is a midpoint rule, so the gap closes like L^-2
    from cooperbound.bounds import g_integrals
    u = (2, 1, 0)
    errs = []
    for L in (10, 20):
        eps = 2 * math.pi * (L / 5 + 0.5) / (2 * L + 1)
        cont, _, _ = g_integrals(u, u, eps=eps, D=3)
        errs.append(abs(lattice_g(LatticeSpec.symmetric(L, 3), u, u, eps)[0] - cont) / cont)
    assert errs[0] < 1e-2 and errs[1] < 3e-3


def test_bound_at_zero_twist_is_one():
    lat = LatticeSpec.symmetric(1, 1)
    assert finite_volume_twist_bound(np.zeros(3), 1.0, 1.0, (1,), (1,), lat) == 1.0


@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.floats(0.1, 3), st.floats(0.1, 3))
def test_log_bound_oracle(phi, beta, alpha):
    lat = LatticeSpec.symmetric(1, 1)
    phi = np.array(phi)
    # sites -1, 0, 1; u = v = 1, reflected site -1
    lap = np.array([phi[1] - phi[0], phi[0] - 2 * phi[1] + phi[2], phi[1] - phi[2]])
    expected = -2 * phi[2] + 2 * phi[0] + beta / alpha * np.sum(np.cosh(lap) - 1)
    assert log_twist_bound(phi, beta, alpha, (1,), (1,), lat) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_wavenumber_grid_counts():
    assert len(wavenumber_grid(1, 0.1, math.pi, 1)) == 2
    k = wavenumber_grid(2, 1e-3, math.pi, 2)
    assert len(k) == 16
    assert {tuple(x) for x in np.round(k, 12)} == {tuple(-x) for x in np.round(k, 12)}


def test_double_loop_over_sources_and_modes():
    # phi_x = (q/|Lambda|) sum_y sum_k e^{ik(x-y)} p_y / E^2 with p = delta_u - delta_-u
    lat = LatticeSpec.symmetric(1, 1)
    q, u = 1.0, 1
    tw = build_twist(q, (u,), 0.1, math.pi, lat)
    for i, (x,) in enumerate(lat.sites):
        total = 0j
        for y, p in ((u, 1.0), (-u, -1.0)):
            for (k,) in wavenumber_grid(1, 0.1, math.pi, 1):
                total += np.exp(1j * k * (x - y)) * p / (1 - math.cos(k)) ** 2
        assert tw.phi[i] == pytest.approx((q * total / 3).real, abs=1e-14)
        assert abs(total.imag) < 1e-12


def test_trivial_twists_and_linearity():
    lat = LatticeSpec.symmetric(2, 2)
    assert not build_twist(0.0, (1, 1), 1e-3, math.pi, lat).phi.any()
    assert np.allclose(build_twist(1.0, (0, 0), 1e-3, math.pi, lat).phi, 0.0, atol=1e-15)
    a = build_twist(0.3, (1, -2), 1e-3, math.pi, lat).phi
    b = build_twist(0.9, (1, -2), 1e-3, math.pi, lat).phi
    np.testing.assert_allclose(b, 3 * a, rtol=1e-13)
