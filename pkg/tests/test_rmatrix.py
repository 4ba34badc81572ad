import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmvqe import pipeline as pl
from rmvqe.ansatz import build_cascade, extract_rotation_matrix
from rmvqe.errors import InputError, PoleError, UnsupportedLayoutError
from rmvqe.rmatrix import (
    Channel,
    ScatteringSolution,
    boundary_amplitudes,
    extract_channel_coeffs,
    fix_signs,
    r_matrix,
    r_matrix_grid,
    write_grid_csv,
)


def test_identity_rotation_coefficients():
    chans = [Channel(1, 3), Channel(2, 2)]
    coeffs = extract_channel_coeffs(np.eye(3), chans)
    assert set(coeffs) == {(0, 3), (1, 2)}
    assert np.array_equal(coeffs[(0, 3)], [0, 1, 0])
    assert np.array_equal(coeffs[(1, 2)], [0, 0, 1])


def test_two_state_rotation_coefficients():
    theta = 0.6
    u = extract_rotation_matrix(build_cascade(2), [theta])
    coeffs = extract_channel_coeffs(u, [Channel(0, 0), Channel(1, 1)])
    assert np.allclose(coeffs[(0, 0)], [math.cos(theta), math.sin(theta)])
    assert np.allclose(coeffs[(1, 1)], [-math.sin(theta), math.cos(theta)])


def test_trial_with_two_continuum_orbitals_rejected():
    with pytest.raises(UnsupportedLayoutError):
        extract_channel_coeffs(np.eye(2), [Channel(0, 1), Channel(0, 2)])


def test_boundary_examples():
    assert np.array_equal(boundary_amplitudes({(0, 0): np.array([1.0])}, {(0, 0): 0.7}), [[0.7]])
    coeffs = {(0, 0): np.array([0.6, 0.8]), (1, 1): np.array([-0.8, 0.6])}
    w = boundary_amplitudes(coeffs, {(0, 0): 0.0, (1, 1): 0.0})
    assert not w.any()
    assert not r_matrix(w, [-1.0, 1.0], 0.0).any()
    with pytest.raises(InputError, match="channel 1"):
        boundary_amplitudes(coeffs, {(0, 0): 0.5})


def test_single_term_r_matrix():
    assert r_matrix(np.array([[1.0]]), [1.0], 0.0)[0, 0] == pytest.approx(0.5)


def test_pole_sign_flip_and_guard():
    w = np.array([[0.3]])
    below = r_matrix(w, [0.5], 0.5 - 1e-4)[0, 0]
    above = r_matrix(w, [0.5], 0.5 + 1e-4)[0, 0]
    assert below > 0 > above
    near = [abs(r_matrix(w, [0.5], 0.5 - d)[0, 0]) for d in (1e-1, 1e-2, 1e-3)]
    assert near == sorted(near)
    with pytest.raises(PoleError) as exc:
        r_matrix(w, [0.5], 0.5 + 1e-12)
    assert exc.value.pole == 0.5


def test_grid_skips_poles():
    with pytest.warns(UserWarning):
        kept, values, skipped = r_matrix_grid(np.array([[1.0]]), [0.0], [-1.0, 0.0, 1.0])
    assert kept == [-1.0, 1.0] and len(values) == 2 and len(skipped) == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_symmetry_and_residues(seed):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(3, 5))
    energies = np.sort(rng.normal(size=5))
    for E in rng.uniform(-3, 3, 10):
        if np.min(np.abs(energies - E)) < 1e-6:
            continue
        R = r_matrix(w, energies, E)
        assert np.abs(R - R.T).max() < 1e-12
    # residue of R_ii at E_k: lim (E - E_k) R_ii = -w_ik^2 / 2
    eps = 1e-6 * np.diff(energies).min()
    for k, Ek in enumerate(energies):
        for side in (-1, 1):
            E = Ek + side * eps
            res = (E - Ek) * np.diag(r_matrix(w, energies, E))
            assert np.allclose(res, -0.5 * w[:, k] ** 2, atol=1e-5)


def test_fix_signs():
    u = np.array([[0.6, -0.8], [-0.8, -0.6]])
    fixed = fix_signs(u)
    assert np.allclose(fixed, [[-0.6, 0.8], [0.8, 0.6]])


def test_solution_json_roundtrip():
    u = extract_rotation_matrix(build_cascade(3), [0.1, 0.2, 0.3])
    sol = ScatteringSolution([-1.0, 0.0, 1.0], u, [Channel(1, 2, "x")], params={"a": 0.25}, kind="subspace_expectation")
    sol.boundary = np.array([[0.1, 0.2, 0.3]])
    back = ScatteringSolution.from_json(sol.to_json())
    assert np.allclose(back.rotation, u) and np.array_equal(back.energies, sol.energies)
    assert back.channels == sol.channels and back.params == sol.params
    assert np.array_equal(back.boundary, sol.boundary)
    with pytest.raises(InputError):
        ScatteringSolution.from_json('{"energies": [0.0]}')
    with pytest.raises(InputError):
        ScatteringSolution([0.0, 1.0], [[1.0, 1.0], [0.0, 1.0]])


def test_grid_csv(tmp_path):
    write_grid_csv(tmp_path / "r.csv", [0.0], [np.array([[0.5, 0.1], [0.1, 0.2]])])
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines == ["E,R_00,R_01,R_10,R_11", "0,0.5,0.1,0.1,0.2"]


def test_h2_boundary_hand_sum(h2):
    cfg, vp, oracle = h2[0], h2[3], h2[4]
    sol = pl.oracle_solution(vp, cfg, oracle)
    for i, ch in enumerate(cfg.channels):
        u = cfg.u_values[(i, ch.continuum_orbital)]
        assert np.allclose(sol.boundary[i], sol.rotation[ch.trial] * u, atol=1e-15)
    # the all-bound trial has no boundary row
    assert sol.boundary.shape == (len(cfg.channels), 5)
    assert 0 not in {ch.trial for ch in cfg.channels}
