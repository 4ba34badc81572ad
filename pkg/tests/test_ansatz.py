import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reference import H2_CI
from rmvqe.ansatz import (
    AnsatzRunner,
    CascadeSpec,
    RegisterLayout,
    SpinCoupling,
    build_ansatz,
    build_cascade,
    clebsch_gordan_angle,
    extract_rotation_matrix,
    prepare_trial,
    trial_basis,
)
from rmvqe.errors import DomainError, LayoutError
from rmvqe.simulator import Statevector, run_circuit

half_spins = st.integers(0, 8).map(lambda n: n / 2)


def test_cg_no_rotation_for_singlet_target():
    assert clebsch_gordan_angle(0.5, 0.5, 0) == 0.0


def test_cg_triplet_target():
    zeta = clebsch_gordan_angle(0.5, 0.5, 1)
    assert zeta == pytest.approx(math.pi / 2 + 0.5 * math.acos(1 / 3), abs=1e-12)
    assert zeta == pytest.approx(2.18628, abs=1e-5)
    assert math.cos(zeta) ** 2 == pytest.approx(1 / 3, abs=1e-12)
    assert math.sin(zeta) ** 2 == pytest.approx(2 / 3, abs=1e-12)


def test_cg_negative_projection():
    assert clebsch_gordan_angle(0.5, -0.5, 1) == pytest.approx(2.52611, abs=1e-5)


def test_cg_invalid_quantum_numbers():
    for args in [(0.5, 1.5, 0), (0.5, 0.5, 2), (0.3, 0.3, 0), (0, 0, -0.5), (1, 0.5, 0.5)]:
        with pytest.raises(DomainError):
            clebsch_gordan_angle(*args)
    with pytest.raises(DomainError):
        SpinCoupling(0.5, 0.5, 1, zeta=4.0)


@settings(max_examples=80, deadline=None)
@given(half_spins, st.data(), st.booleans())
def test_cg_ranges(S, data, lower):
    S = S + 0.5  # total spin of N+1 electrons with N even here, so half-odd
    M = data.draw(st.sampled_from([S - m for m in range(int(2 * S) + 1)]))
    zeta = clebsch_gordan_angle(S, M, S - 0.5 if lower else S + 0.5)
    assert math.cos(zeta) ** 2 + math.sin(zeta) ** 2 == pytest.approx(1.0, abs=1e-15)
    if lower:
        assert 0 <= zeta <= math.pi / 2
    else:
        assert math.pi / 2 <= zeta < math.pi


def test_cascade_pairs():
    assert build_cascade(2).pair_order == ((0, 1),)
    assert build_cascade(3).pair_order == ((1, 2), (0, 1), (0, 2))
    c5 = build_cascade(5)
    assert len(c5.pair_order) == len(c5.param_names) == 10
    assert c5.pair_order[0] == (3, 4) and c5.pair_order[-1] == (0, 4)
    assert c5.block(0) == ["theta_0_1", "theta_0_2", "theta_0_3", "theta_0_4"]
    with pytest.raises(DomainError):
        build_cascade(1)
    with pytest.raises(DomainError):
        CascadeSpec(3, ((0, 1), (1, 0), (0, 2)), ("a", "b", "c"))


def test_rotation_matrix_examples():
    assert np.array_equal(extract_rotation_matrix(build_cascade(4), [0.0] * 6), np.eye(4))
    u = extract_rotation_matrix(build_cascade(2), [math.pi / 2])
    assert np.allclose(u, [[0, 1], [-1, 0]], atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_rotation_matrix_special_orthogonal(seed):
    cascade = build_cascade(5)
    u = extract_rotation_matrix(cascade, np.random.default_rng(seed).uniform(-math.pi, math.pi, 10))
    assert np.abs(u.T @ u - np.eye(5)).max() < 1e-12
    assert np.linalg.det(u) == pytest.approx(1.0, abs=1e-12)


def _small_layout():
    # N=1 target on qubits 0,1; continuum 2; flags 3 (bound) and 4 (open)
    return RegisterLayout((0, 1), (2,), (3, 4), 1, channel_map={4: 2}, bound_config={3: (0, 1)},
                          eigenstate_patterns={4: (0,)}, trial_seeds=(3, 4))


def test_layout_validation():
    _small_layout()
    with pytest.raises(LayoutError):
        RegisterLayout((0, 1), (1,), (3,), 1, bound_config={3: (0, 1)}, trial_seeds=(3,))
    with pytest.raises(LayoutError):
        RegisterLayout((0, 1), (2,), (3,), 1, channel_map={3: 2}, trial_seeds=(3,))
    with pytest.raises(LayoutError):
        RegisterLayout((0, 1), (2,), (3,), 1, bound_config={3: (0,)}, trial_seeds=(3,))


def test_missing_spin_partner():
    layout = _small_layout()
    with pytest.raises(LayoutError):
        build_ansatz(layout, build_cascade(2), [None, SpinCoupling(0.5, 0.5, 1)])


def test_small_ansatz_zero_parameters():
    layout = _small_layout()
    circ = build_ansatz(layout, build_cascade(2))
    bound = run_circuit(prepare_trial(circ, 0), Statevector.basis(5, 0))
    assert np.allclose(bound.amplitudes, Statevector.from_occupied(5, [0, 1, 3]).amplitudes)
    open_ = run_circuit(prepare_trial(circ, 1), Statevector.basis(5, 0))
    assert np.allclose(open_.amplitudes, Statevector.from_occupied(5, [0, 2, 4]).amplitudes)
    with pytest.raises(DomainError):
        prepare_trial(circ, 2)


def test_h2_circuit_size(h2):
    vp = h2[3]
    assert len(vp.param_names) == 10
    assert vp.circuit.n_qubits == 13  # 7 system qubits plus 6 flags
    assert vp.layout.k == 5


def test_h2_trial_zero_is_all_bound(h2):
    runner = h2[3].runner
    phys = trial_basis(runner)
    # sigma_g up, sigma_g down, sigma_u up
    assert abs(phys[0, 0b0000111]) == pytest.approx(1.0, abs=1e-14)


def test_h2_trial_one_carries_target_ground_state(h2):
    phys = trial_basis(h2[3].runner)
    c0, c1 = abs(phys[1, 0b1000011]), abs(phys[1, 0b1001100])
    # angle from the variational target solve, energy tolerance 1e-7
    assert (c0, c1) == pytest.approx(H2_CI, abs=1e-7)
    assert c0 ** 2 + c1 ** 2 == pytest.approx(1.0, abs=1e-12)


def test_h2_spin_coupled_trial(h2):
    phys = trial_basis(h2[3].runner)
    # triplet target branch: up-up target with down electron vs mixed target with up electron
    weights = sorted(np.round(np.abs(phys[4][np.abs(phys[4]) > 1e-12]) ** 2, 12))
    assert weights == pytest.approx([1 / 6, 1 / 6, 2 / 3], abs=1e-12)


def _number_and_sz(state, n):
    occ = [b for b in range(1 << n) if abs(state[b]) > 1e-12]
    counts = {bin(b).count("1") for b in occ}
    sz = {0.5 * sum(1 if q % 2 == 0 else -1 for q in range(n) if b >> q & 1) for b in occ}
    return counts, sz


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_h2_prepared_states_properties(h2, seed):
    cfg, vp = h2[0], h2[3]
    rng = np.random.default_rng(seed)
    params = dict(zip(vp.param_names, rng.uniform(-math.pi, math.pi, 10)))
    states = vp.runner.physical(params, range(5))
    n = len(vp.layout.system_qubits)
    Pd = vp.P.to_matrix()
    assert np.abs(states.conj() @ states.T - np.eye(5)).max() < 1e-10
    for psi in states:
        assert np.linalg.norm(Pd @ psi - psi) < 1e-10
        assert np.vdot(psi, Pd @ psi).real == pytest.approx(1.0, abs=1e-10)
        counts, sz = _number_and_sz(psi, n)
        assert counts == {vp.layout.N + 1}
        assert sz == {cfg.M}


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_h2_circuit_realises_rotation(h2, seed):
    vp = h2[3]
    params = dict(zip(vp.param_names, np.random.default_rng(seed).uniform(-math.pi, math.pi, 10)))
    basis = trial_basis(vp.runner)
    slots = vp.runner.slot_states(params, range(5))
    assert np.abs((basis.conj() @ slots.T).real - vp.rotation(params)).max() < 1e-10


def test_h2_runner_matches_full_simulation(h2):
    vp = h2[3]
    rng = np.random.default_rng(4)
    params = dict(zip(vp.param_names, rng.uniform(-1, 1, 10)))
    full = vp.runner.full_states(params, range(5))
    for i in range(5):
        ref = run_circuit(prepare_trial(vp.circuit, i), Statevector.basis(vp.circuit.n_qubits, 0), params)
        assert np.abs(full[i] - ref.amplitudes).max() < 1e-12


def test_runner_expect_matches_dense(h2):
    vp = h2[3]
    params = dict(zip(vp.param_names, np.linspace(-1, 1, 10)))
    amps = vp.runner.flag_states(params, range(5))
    phys = vp.runner.physical(params, range(5))
    Hd = vp.H.to_matrix()
    dense = np.einsum("ri,ij,rj->r", phys.conj(), Hd, phys).real
    assert np.abs(vp.runner.expect(vp.H, amps) - dense).max() < 1e-10


def test_runner_rejects_rotations_after_fans():
    layout = _small_layout()
    circ = build_ansatz(layout, build_cascade(2))
    bad = circ.prefixed([])
    bad.gates.append(bad.gates[0])
    with pytest.raises(LayoutError):
        AnsatzRunner(bad, layout)
