import numpy as np
import pytest
import scipy.sparse as sp

from cooperbound.fock import (DOWN, UP, CapacityError, FermionModel, FermionSystem, FockSpace,
                              UnsupportedModelError, build_hamiltonian, build_mode_operators,
                              cooper_operator, log_partition, thermal_expectation, wick_oracle)
from cooperbound.lattice import LatticeSpec


def anti(a, b):
    return (a @ b + b @ a).toarray()


def test_canonical_anticommutation():
    ops = build_mode_operators(LatticeSpec.box((2,)))
    n = ops.space.n_modes
    eye = np.eye(ops.space.dim)
    for a in range(n):
        for b in range(n):
            assert np.array_equal(anti(ops.annihilate[a], ops.create[b]), eye * (a == b))
            assert not anti(ops.annihilate[a], ops.annihilate[b]).any()


def test_hopping_operator_is_product():
    space = FockSpace(2)
    for a, b in [(0, 3), (3, 0), (1, 1)]:
        assert np.array_equal(space.hopping(a, b).toarray(),
                              (space.creation(a) @ space.annihilation(b)).toarray())


def test_capacity():
    with pytest.raises(CapacityError):
        FockSpace(7)
    FockSpace(7, cap=1 << 14)


def test_atomic_limit_spectrum():
    # each site contributes U once when doubly occupied
    lat = LatticeSpec.box((2,))
    H = build_hamiltonian(FermionModel(t=0.0, U=-2.0), np.zeros(1), lat)
    w = np.sort(np.linalg.eigvalsh(H))
    assert np.allclose(w, [-4.0] + [-2.0] * 6 + [0.0] * 9)


def test_two_site_single_particle_levels(rng):
    lat = LatticeSpec.box((2,))
    A = rng.uniform(-np.pi, np.pi, 1)
    H = build_hamiltonian(FermionModel(t=0.8), A, lat)
    space = FockSpace(2)
    one = np.flatnonzero(space.total_number == 1)
    w = np.linalg.eigvalsh(H[np.ix_(one, one)])
    assert np.allclose(w, [-0.8, -0.8, 0.8, 0.8])


def test_hamiltonian_hermitian_and_conserves_spin_numbers(rng):
    lat = LatticeSpec.box((2, 2))
    H = build_hamiltonian(FermionModel(t=1.0, U=-1.0, V=0.3, mu=0.2), rng.uniform(-3, 3, lat.n_bonds), lat,
                          grand=True)
    assert np.allclose(H, H.conj().T)
    occ = FockSpace(4).occupations
    for col in (occ[:, 0::2].sum(1), occ[:, 1::2].sum(1)):
        N = np.diag(col.astype(float))
        assert np.allclose(H @ N, N @ H)


def test_real_gauge_covariance(rng):
    lat = LatticeSpec.box((2, 2))
    model = FermionModel(t=1.0, U=-2.0)
    A = rng.uniform(-np.pi, np.pi, lat.n_bonds)
    chi = rng.normal(size=lat.n_sites)
    G = FockSpace(4).gauge_phase_diagonal(chi)
    H = build_hamiltonian(model, A, lat)
    Hc = build_hamiltonian(model, A + lat.grad(chi), lat)
    assert np.allclose(Hc, (G[:, None] * H) * G.conj()[None, :], atol=1e-13)


def test_cooper_operator_factorized_form():
    lat = LatticeSpec.symmetric(1, 1)
    ops = build_mode_operators(lat)
    iu, imu = lat.index((1,)), lat.index((-1,))
    expected = (ops.c_dag(iu, UP) @ ops.c(imu, UP)) @ (ops.c_dag(iu, DOWN) @ ops.c(imu, DOWN))
    assert np.array_equal(cooper_operator(lat, (1,), (1,)).toarray(), expected.toarray())


@pytest.mark.parametrize("random_field", [False, True])
def test_wick_oracle_matches_exact_diagonalization(random_field, rng):
    lat = LatticeSpec.box((4,))
    model = FermionModel(t=1.0, mu=0.3)
    A = rng.uniform(-np.pi, np.pi, lat.n_bonds) if random_field else np.zeros(lat.n_bonds)
    H = build_hamiltonian(model, A, lat, grand=True)
    for u, v in [((0,), (0,)), ((0,), (1,)), ((1,), (3,))]:
        ed = thermal_expectation(cooper_operator(lat, u, v), H, 1.3)
        assert abs(ed - wick_oracle(model, A, 1.3, u, v, lat)) < 1e-10


def test_wick_oracle_rejects_interactions():
    with pytest.raises(UnsupportedModelError):
        wick_oracle(FermionModel(U=-1), np.zeros(1), 1.0, (0,), (0,), LatticeSpec.box((2,)))


@pytest.mark.parametrize("model", [
    FermionModel(t=1.0, U=-2.0, V=0.5, mu=0.4),
    FermionModel(hopping=np.array([[[-1.0, 0.3j], [-0.3j, -0.5]]] * 4), U=-1.0),
])
def test_block_engine_matches_dense(model, rng):
    lat = LatticeSpec.box((2, 2))
    sys_ = FermionSystem(lat, model)
    A = rng.uniform(-np.pi, np.pi, lat.n_bonds)
    H = build_hamiltonian(model, A, lat, grand=True)
    assert np.allclose(sys_.dense(A), H, atol=1e-13)
    op = cooper_operator(lat, (1, 1), (1, 0))
    logz, (val,) = sys_.thermal(sys_.eig(A), 0.9, [sys_.observable_blocks(op)])
    assert np.isclose(logz, log_partition(H, 0.9))
    assert np.isclose(sys_.log_trace(A, 0.9), logz)
    assert abs(val - thermal_expectation(op, H, 0.9)) < 1e-12


def test_beta_zero_traces_are_exact():
    lat = LatticeSpec.symmetric(1, 1)
    sys_ = FermionSystem(lat, FermionModel(t=1.0, U=-2.0))
    op = cooper_operator(lat, (1,), (1,))
    logz, (val,) = sys_.thermal(sys_.eig(np.zeros(2)), 0.0, [sys_.observable_blocks(op)])
    assert val == 0 and np.isclose(logz, np.log(64))


def test_model_caps():
    with pytest.raises(ValueError):
        FermionModel(t=2.0, t0=1.0)
    with pytest.raises(ValueError):
        FermionModel(U=-3.0, W0=1.0)
