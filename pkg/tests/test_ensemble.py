import numpy as np
import pytest
import scipy.sparse as sp
from scipy.special import ive

from cooperbound.ensemble import (Ensemble, EnsembleSpec, QuadratureError, SamplerSettings, _pool, _tau_int,
                                  effective_action, exact_expectation, run_mc)
from cooperbound.fock import FermionModel, FermionSystem, cooper_operator, log_partition, build_hamiltonian
from cooperbound.gauge import GaugeCouplings, fluxes, gauge_energy
from cooperbound.lattice import LatticeSpec

CHAIN = LatticeSpec.symmetric(1, 1)
SQUARE = LatticeSpec.box((2, 2))
# two independent quadrature orders (32 and 48 base nodes) agree on this value to 1e-15 relative
CHAIN_REGRESSION = 4.4221009744812e-05


def chain_spec(**kw):
    c = dict(kappa=1.0, alpha=0.5, beta=2.0)
    c.update(kw.pop("couplings", {}))
    return EnsembleSpec(CHAIN, kw.pop("model", FermionModel(t=1.0, U=-2.0)), GaugeCouplings(**c), **kw)


def test_normalization():
    spec = chain_spec()
    assert exact_expectation(spec, None) == 1
    ident = sp.identity(64, format="csr")
    assert abs(exact_expectation(spec, ident) - 1) < 1e-12


def test_beta_zero_cooper_vanishes():
    spec = chain_spec(couplings={"beta": 0.0})
    assert exact_expectation(spec, cooper_operator(CHAIN, (1,), (1,))) == 0


def test_regression_value():
    spec = EnsembleSpec(CHAIN, FermionModel(t=1.0, U=-2.0), GaugeCouplings(kappa=1, alpha=1, beta=1))
    val = exact_expectation(spec, cooper_operator(CHAIN, (1,), (1,)))
    assert abs(val.real - CHAIN_REGRESSION) < 1e-12 * CHAIN_REGRESSION * 1e3
    assert abs(val.imag) < 1e-15


@pytest.mark.parametrize("u,v", [((1,), (1,)), ((1,), (-1,)), ((0,), (1,))])
def test_reduced_equals_brute_on_chain(u, v):
    spec = chain_spec(quad_nodes=16, quad_tol=np.inf)
    op = cooper_operator(CHAIN, u, v)
    a = exact_expectation(spec, op, "reduced")
    b = exact_expectation(spec, op, "brute")
    assert abs(a - b) < 1e-13


@pytest.mark.parametrize("frozen", [False, True])
def test_reduced_equals_brute_on_square(frozen):
    spec = EnsembleSpec(SQUARE, FermionModel(t=1.0, U=-1.0), GaugeCouplings(kappa=0.5, alpha=2.0, beta=0.5,
                                                                            flux_frozen=frozen),
                        quad_nodes=4, quad_tol=np.inf)
    op = cooper_operator(SQUARE, (1, 1), (1, 0))
    ens = Ensemble(spec)
    a = ens.exact_expectation(op, "reduced")
    b = ens.exact_expectation(op, "brute")
    assert abs(a - b) < 1e-13


def test_non_convergence_raises():
    spec = chain_spec(quad_nodes=4, couplings={"alpha": 0.1})
    with pytest.raises(QuadratureError) as err:
        exact_expectation(spec, cooper_operator(CHAIN, (1,), (1,)))
    assert "diff" in err.value.diagnostics


def test_effective_action_definition(rng):
    spec = chain_spec()
    A = rng.uniform(-np.pi, np.pi, 2)
    H = build_hamiltonian(spec.model, A, CHAIN, grand=True)
    expected = spec.couplings.beta * gauge_energy(A, spec.couplings, CHAIN) - log_partition(H, 2.0)
    assert np.isclose(effective_action(spec, A), expected)


def test_gauge_observable_exact_matches_bessel():
    # one bond between two sites: weight exp((2 beta / alpha) cos A)
    lat = LatticeSpec.box((2,))
    spec = EnsembleSpec(lat, FermionModel(t=0.0), GaugeCouplings(alpha=0.8, beta=1.1))
    s = 2 * 1.1 / 0.8
    val = exact_expectation(spec, lambda A: np.cos(A[..., 0]))
    assert np.isclose(val.real, ive(1, s) / ive(0, s), atol=1e-12)


def _mc(spec, obs, seed=3):
    return run_mc(spec, obs, seed)


@pytest.mark.parametrize("t", [0.0, 1.0])
def test_mc_single_bond_distribution(t):
    # the fermionic trace on a tree lattice does not depend on A, so both paths sample exp((2 beta/alpha) cos A)
    lat = LatticeSpec.box((2,))
    sampler = SamplerSettings(sweeps=20000, thermalization=200, chains=2)
    spec = EnsembleSpec(lat, FermionModel(t=t), GaugeCouplings(alpha=0.8, beta=1.1), sampler)
    est = _mc(spec, {"cos": lambda A: np.cos(A[0])})["cos"]
    s = 2 * 1.1 / 0.8
    assert abs(est.mean - ive(1, s) / ive(0, s)) < 3 * est.stderr


def test_mc_pure_gauge_plaquette_matches_exact():
    spec = EnsembleSpec(SQUARE, FermionModel(t=0.0), GaugeCouplings(kappa=1.0, alpha=0.5, beta=1.0),
                        SamplerSettings(sweeps=8000, thermalization=300), quad_tol=1e-6)
    plaq = lambda A: np.cos(fluxes(SQUARE, A)).sum(axis=-1)
    exact = exact_expectation(spec, plaq).real
    est = _mc(spec, {"plaq": plaq})["plaq"]
    assert abs(est.mean - exact) < 3 * est.stderr


def test_mc_fermionic_chain_matches_exact():
    spec = chain_spec(sampler=SamplerSettings(sweeps=3000, thermalization=200))
    ops = {"pair": cooper_operator(CHAIN, (0,), (0,)), "cooper": cooper_operator(CHAIN, (1,), (1,))}
    est = _mc(spec, ops)
    for name, op in ops.items():
        exact = exact_expectation(spec, op).real
        assert abs(est[name].mean - exact) <= max(3 * est[name].stderr, 1e-12), name
    # on a tree lattice the on-site pair density does not see the gauge field
    assert est["pair"].stderr < 1e-12 < est["cooper"].stderr


def test_mc_flux_frozen_matches_exact():
    spec = EnsembleSpec(SQUARE, FermionModel(t=1.0, U=-2.0),
                        GaugeCouplings(alpha=1.0, beta=1.0, flux_frozen=True),
                        SamplerSettings(sweeps=1500, thermalization=100), quad_nodes=16)
    op = cooper_operator(SQUARE, (1, 1), (1, 1))
    exact = exact_expectation(spec, op).real
    est = _mc(spec, {"c": op})["c"]
    assert abs(est.mean - exact) < 3 * est.stderr


def test_mc_deterministic_and_seed_sensitive():
    spec = chain_spec(sampler=SamplerSettings(sweeps=300, thermalization=50, chains=2))
    op = {"c": cooper_operator(CHAIN, (1,), (1,))}
    a, b = _mc(spec, op, 11)["c"], _mc(spec, op, 11)["c"]
    assert a.to_dict() == b.to_dict()
    assert _mc(spec, op, 12)["c"].mean != a.mean


def test_chain_permutation_leaves_pooled_estimate():
    spec = chain_spec(sampler=SamplerSettings(sweeps=200, thermalization=20, chains=3))
    op = {"c": cooper_operator(CHAIN, (0,), (0,))}
    ens = Ensemble(spec)
    fwd = ens.run_mc(op, 5, chain_keys=(0, 1, 2))["c"]
    rev = ens.run_mc(op, 5, chain_keys=(2, 1, 0))["c"]
    assert rev.chain_means == fwd.chain_means[::-1]
    assert (rev.mean, rev.stderr, rev.tau_int) == (fwd.mean, fwd.stderr, fwd.tau_int)


def test_invalid_sampler_settings():
    with pytest.raises(ValueError):
        SamplerSettings(sweeps=0)
    with pytest.raises(ValueError):
        SamplerSettings(delta=4.0)


def test_low_acceptance_warning():
    spec = EnsembleSpec(SQUARE, FermionModel(t=0.0), GaugeCouplings(kappa=50.0, alpha=0.002, beta=50.0),
                        SamplerSettings(delta=np.pi, tune=False, sweeps=200, thermalization=0, chains=1))
    est = _mc(spec, {"p": lambda A: np.cos(A[0])})["p"]
    assert est.acceptance < 0.01
    assert any("acceptance" in w for w in est.warnings)


def test_tau_int_of_ar1_process():
    r = np.random.default_rng(0)
    rho, n = 0.8, 200_000
    x = np.empty(n)
    x[0] = 0.0
    noise = r.normal(size=n)
    for i in range(1, n):
        x[i] = rho * x[i - 1] + noise[i]
    assert abs(_tau_int(x) - (1 + rho) / (2 * (1 - rho))) < 0.1 * 4.5
    assert abs(_tau_int(noise) - 0.5) < 0.05


def test_jackknife_error_of_independent_samples():
    r = np.random.default_rng(1)
    series = [r.normal(size=4000).astype(complex) for _ in range(4)]
    est = _pool("x", series, 32)
    assert abs(est.stderr - 1 / np.sqrt(16000)) < 0.2 / np.sqrt(16000)
