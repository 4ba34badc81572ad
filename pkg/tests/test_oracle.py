import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_setup
from reference import H2_SCATTERING_SPECTRUM, H2_SECTOR_DIM, RANDOM_SPECTRA
from rmvqe.errors import InputError
from rmvqe.oracle import (
    IrrepFilter,
    SectorBasis,
    dense_hamiltonian,
    enumerate_sector,
    exact_spectrum,
)
from rmvqe.pauli import PauliSum


def _layout(target, cont):
    return type("L", (), {"target_qubits": target, "continuum_qubits": cont})


def test_enumerate_small_sector():
    basis = enumerate_sector(_layout((0, 1), (2,)), 1)
    assert basis.bitstrings == [0b011, 0b101, 0b110]
    assert basis.index_map == {0b011: 0, 0b101: 1, 0b110: 2}


def test_enumerate_without_continuum():
    basis = enumerate_sector(_layout((0, 1, 2), ()), 1)
    assert basis.bitstrings == [0b011, 0b101, 0b110]
    assert all(bin(b).count("1") == 2 for b in basis.bitstrings)


def test_enumerate_h2_sector(h2):
    oracle = h2[4]
    assert len(oracle.basis) == H2_SECTOR_DIM
    assert len(oracle.energies) == 5  # doublets left after the S^2 filter


def test_irrep_products():
    f = IrrepFilter("b1u")
    assert f.product(["ag", "b1u", "b1u"]) == "ag"
    assert f.product(["b1u", "ag"]) == "b1u"
    assert f.product([]) == "ag"


def test_dense_hamiltonian_examples():
    basis = SectorBasis([0, 1], 1)
    assert np.array_equal(dense_hamiltonian(PauliSum.from_word("Z0", 1), basis), np.diag([1.0, -1.0]))
    assert np.array_equal(dense_hamiltonian(PauliSum.from_word("X0", 1), basis), [[0.0, 1.0], [1.0, 0.0]])


def test_exact_spectrum_examples():
    w, v = exact_spectrum(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(w, [1, 2, 3])
    assert np.allclose(np.abs(v), np.eye(3)[:, [1, 2, 0]])
    w, _ = exact_spectrum(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(w, [-1, 1])
    with pytest.raises(InputError):
        exact_spectrum(np.array([[0.0, 1.0], [0.0, 0.0]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 8))
def test_exact_spectrum_residuals(seed, n):
    a = np.random.default_rng(seed).normal(size=(n, n))
    a = a + a.T
    w, v = exact_spectrum(a)
    for k in range(n):
        assert np.linalg.norm(a @ v[:, k] - w[k] * v[:, k]) < 1e-9
    assert np.abs(v @ np.diag(w) @ v.T - a).max() < 1e-9
    assert np.abs(v.T @ v - np.eye(n)).max() < 1e-12
    assert np.allclose(w, np.linalg.eigvalsh(a), atol=1e-10)


def test_h2_sector_closed_under_php(h2):
    oracle = h2[4]
    assert oracle.php_leakage < 1e-10
    # the raw Hamiltonian moves electrons between target and continuum
    assert oracle.leakage > 1e-3


def test_h2_spectrum_matches_reference(h2):
    assert np.abs(h2[4].energies - H2_SCATTERING_SPECTRUM).max() < 1e-9


def test_h2_sector_bitstrings_satisfy_projector(h2):
    vp, oracle = h2[3], h2[4]
    Pd = np.diag(vp.P.to_matrix()).real
    assert all(Pd[b] == pytest.approx(1.0) for b in oracle.basis.bitstrings)


@pytest.mark.parametrize("seed", sorted(RANDOM_SPECTRA))
def test_random_spectrum_matches_reference(seed):
    assert np.abs(random_setup(seed)[3].energies - RANDOM_SPECTRA[seed]).max() < 1e-9
