import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import h2_solution, random_setup, random_state
from rmvqe.ansatz import RegisterLayout
from rmvqe.errors import ConvergenceError, DomainError
from rmvqe.pauli import PauliSum
from rmvqe.solver import (
    ConvergenceTrace,
    CostSpec,
    OptimiserConfig,
    VariationalProblem,
    cost_folded,
    cost_sum_of_variances,
    cost_variance,
    duplicate_warnings,
    measurement_budget,
    single_state_optimise,
    solve,
    subspace_optimise,
)

TOL = 1e-7


def two_level(e, v, e2):
    """k=2 problem whose projected block is [[e, v], [v, e2]]."""
    layout = RegisterLayout((0, 1), (2,), (3, 4), 1, channel_map={4: 2}, bound_config={3: (0, 1)},
                            eigenstate_patterns={4: (0,)}, trial_seeds=(3, 4))
    H = PauliSum.from_list([
        (0.5 * e, "I"), (-0.5 * e, "Z1"), (0.5 * e2, "I"), (-0.5 * e2, "Z2"),
        (0.5 * v, "X1 X2"), (0.5 * v, "Y1 Y2"),
    ], 3)
    return VariationalProblem(layout, H)


def physical(c0, c1):
    """c0 |q0 q1> + c1 |q0 q2> on three system qubits."""
    psi = np.zeros(8, dtype=complex)
    psi[0b011], psi[0b101] = c0, c1
    return psi


def block_eigen(e, v, e2):
    return np.linalg.eigh(np.array([[e, v], [v, e2]]))


def test_two_level_block_is_as_built():
    vp = two_level(-0.4, 0.25, 0.3)
    Hd = vp.H.to_matrix()
    assert Hd[0b011, 0b011] == pytest.approx(-0.4)
    assert Hd[0b101, 0b101] == pytest.approx(0.3)
    assert Hd[0b011, 0b101] == pytest.approx(0.25)


def test_variance_of_eigenstate_is_zero():
    vp = two_level(-0.4, 0.25, 0.3)
    _, vecs = block_eigen(-0.4, 0.25, 0.3)
    for k in range(2):
        assert abs(cost_variance(physical(*vecs[:, k]), vp.H, vp.HPH)) < 1e-10


def test_variance_of_two_level_superposition():
    vp = two_level(-0.4, 0.25, 0.3)
    w, vecs = block_eigen(-0.4, 0.25, 0.3)
    psi = physical(*((vecs[:, 0] + vecs[:, 1]) / math.sqrt(2)))
    assert cost_variance(psi, vp.H, vp.HPH) == pytest.approx((w[0] - w[1]) ** 2 / 4, abs=1e-12)


def test_folded_examples():
    vp = two_level(-0.4, 0.25, 0.3)
    w, vecs = block_eigen(-0.4, 0.25, 0.3)
    psi = physical(*vecs[:, 0])
    assert abs(cost_folded(psi, vp.H, vp.HPH, w[0])) < 1e-10
    assert cost_folded(psi, vp.H, vp.HPH, w[0] + 0.03) == pytest.approx(0.03 ** 2, abs=1e-12)


def test_sum_of_variances_additive():
    vp = two_level(-0.4, 0.25, 0.3)
    w, vecs = block_eigen(-0.4, 0.25, 0.3)
    exact = np.array([physical(*vecs[:, 0]), physical(*vecs[:, 1])])
    assert abs(cost_sum_of_variances(exact, vp.H, vp.HPH)) < 1e-10
    mixed = np.array([physical(*((vecs[:, 0] + vecs[:, 1]) / math.sqrt(2))), exact[1]])
    assert cost_sum_of_variances(mixed, vp.H, vp.HPH) == pytest.approx((w[0] - w[1]) ** 2 / 4, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-2, 2))
def test_costs_match_dense_on_projected_states(seed, e_tilde):
    rng = np.random.default_rng(seed)
    vp = two_level(*rng.normal(size=3))
    Hd, Pd = vp.H.to_matrix(), vp.P.to_matrix()
    psi = Pd @ random_state(rng, 3)
    psi /= np.linalg.norm(psi)
    e = np.vdot(psi, Hd @ psi).real
    h2 = np.vdot(psi, Hd @ Pd @ Hd @ psi).real
    assert cost_variance(psi, vp.H, vp.HPH) == pytest.approx(h2 - e * e, abs=1e-10)
    assert cost_variance(psi, vp.H, vp.HPH) >= -1e-10
    assert cost_folded(psi, vp.H, vp.HPH, e_tilde) == pytest.approx(h2 - 2 * e_tilde * e + e_tilde ** 2, abs=1e-10)


def test_cost_spec_validation():
    vp = two_level(0.0, 0.1, 1.0)
    with pytest.raises(DomainError):
        CostSpec("variance", vp.H)
    with pytest.raises(DomainError):
        CostSpec("subspace", vp.H, vp.HPH)
    with pytest.raises(DomainError):
        CostSpec("gradient", vp.H)
    with pytest.raises(DomainError):
        OptimiserConfig(initial_trust_radius=1e-9)


def test_subspace_diagonal_block_needs_no_rotation():
    vp = two_level(-0.5, 0.0, 0.2)
    sol = subspace_optimise(vp, OptimiserConfig())
    assert sol.energies == pytest.approx([-0.5, 0.2], abs=TOL)
    assert np.abs(np.abs(sol.rotation) - np.eye(2)).max() < 1e-6


def test_subspace_two_by_two_closed_form():
    e, v, e2 = -0.3, 0.4, 0.5
    sol = subspace_optimise(two_level(e, v, e2), OptimiserConfig())
    lower = 0.5 * (e + e2) - math.sqrt(0.25 * (e - e2) ** 2 + v * v)
    upper = 0.5 * (e + e2) + math.sqrt(0.25 * (e - e2) ** 2 + v * v)
    assert sol.energies == pytest.approx([lower, upper], abs=TOL)


def test_folded_finds_nearest_eigenvalue():
    e, v, e2 = -1.0, 0.3, 1.0
    vp = two_level(e, v, e2)
    w, _ = block_eigen(e, v, e2)
    res = single_state_optimise(vp, OptimiserConfig(), "folded", vp.slot_order[0])
    assert res.energy == pytest.approx(w[np.argmin(np.abs(w - e))], abs=TOL)


def test_eigenstate_trial_is_only_verified():
    vp = two_level(-0.5, 0.0, 0.2)
    res = single_state_optimise(vp, OptimiserConfig(), "variance", vp.slot_order[0])
    assert res.evaluations == 1
    assert res.cost < TOL ** 2


def test_budget_exhaustion_raises_with_trace():
    vp = two_level(-0.3, 0.4, 0.5)
    with pytest.raises(ConvergenceError) as exc:
        subspace_optimise(vp, OptimiserConfig(max_evaluations=3))
    assert len(exc.value.trace) > 0


def test_measurement_budget(h2):
    vp = h2[3]
    sub = measurement_budget(vp.cost_spec("subspace"))
    var = measurement_budget(vp.cost_spec("variance"))
    assert sub == len(vp.H.simplify())
    assert var == measurement_budget(vp.cost_spec("folded"))
    assert sub < var


def test_h2_sum_of_variances_converged(h2):
    vp = h2[3]
    sol = h2_solution("sum_of_variances")
    e, hph = vp.moments(sol.params, range(vp.k))
    assert np.sum(hph - e * e) < 1e-13


def test_h2_folded_spectrum(h2):
    oracle = h2[4]
    sol = h2_solution("folded")
    assert np.abs(sol.energies - oracle.energies).max() < TOL


def test_h2_variance_recovers_or_warns(h2):
    oracle = h2[4]
    sol = h2_solution("variance")
    full = np.abs(np.sort(sol.energies) - oracle.energies).max() < TOL
    assert full or sol.warnings


def test_duplicate_warnings():
    assert duplicate_warnings([0.0, 1.0, 2.0], TOL) == []
    assert len(duplicate_warnings([0.0, 2e-8, 2.0], TOL)) == 1


def test_orthogonality_through_subspace_rounds(h2):
    vp = h2[3]
    sol = h2_solution("subspace")
    trace = sol.trace
    for idx in np.linspace(0, len(trace) - 1, 40).astype(int):
        params = dict(zip(vp.param_names, trace.records[idx][2]))
        states = vp.runner.slot_states(params, range(vp.k))
        assert np.abs(states.conj() @ states.T - np.eye(vp.k)).max() < 1e-10


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_round_zero_variational_bound(seed):
    cfg, _, vp, oracle = random_setup(seed)
    res = single_state_optimise(vp, cfg.optimiser, "subspace", vp.slot_order[0])
    assert res.energy >= oracle.energies[0] - TOL
    assert res.energy == pytest.approx(oracle.energies[0], abs=TOL)


def test_deterministic_traces(h2):
    cfg, vp = h2[0], h2[3]
    a = solve(vp, cfg.optimiser, "subspace")
    b = solve(vp, cfg.optimiser, "subspace")
    assert len(a.trace) == len(b.trace)
    for ra, rb in zip(a.trace.records, b.trace.records):
        assert ra[0] == rb[0] and ra[1] == rb[1]
        assert np.array_equal(ra[2], rb[2]) and np.array_equal(ra[3], rb[3])


def test_trace_csv(tmp_path):
    trace = ConvergenceTrace(["a", "b"], 2)
    trace.add(0.5, [0.1, 0.2], [-1.0, 1.0])
    trace.add(0.25, [0.1, 0.3], [-1.1, 1.1])
    trace.write_csv(tmp_path / "t.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["eval", "cost", "param_0", "param_1", "E_0", "E_1"]
    assert [int(r[0]) for r in rows[1:]] == [0, 1]
