import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reference import H2_TARGET_GROUND
from rmvqe.errors import InputError, ParseError, SchemaError
from rmvqe.fermion import (
    FermionOperator,
    FermionProblem,
    SpinOrbital,
    build_second_quantised,
    jordan_wigner,
    parse_fcidump,
    qubit_hamiltonian,
    s_squared_operator,
)
from rmvqe.fixtures import data_path, random_problem
from rmvqe.oracle import fermion_matrix
from rmvqe.pauli import PauliSum

TOY = """ &FCI NORB=1,NELEC=1,MS2=1,
  CONV=CHEMIST,
 &END
  -1.0 1 1 0 0
  0.5 0 0 0 0
"""


def write(tmp_path, text, name="f.fcidump"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_minimal(tmp_path):
    prob = parse_fcidump(write(tmp_path, TOY))
    assert prob.n_spin_orbitals == 2
    assert prob.h_nuc == 0.5
    assert np.array_equal(prob.h_one, -np.eye(2))
    assert [o.spin for o in prob.orbitals] == ["up", "down"]


def test_parse_upper_triangle_symmetrised(tmp_path):
    text = """ &FCI NORB=2,NELEC=2,MS2=0,CONV=CHEMIST,
 &END
  -1.0 1 1 0 0
  0.25 1 2 0 0
  -0.5 2 2 0 0
  0.0 0 0 0 0
"""
    prob = parse_fcidump(write(tmp_path, text))
    assert np.array_equal(prob.h_one, prob.h_one.T)
    assert prob.h_one[0, 2] == prob.h_one[2, 0] == 0.25
    assert prob.h_one[0, 1] == 0.0  # spin-forbidden block stays empty


def test_parse_h2_fixture_values():
    path = data_path("h2_sto3g.fcidump")
    prob = parse_fcidump(path)
    assert prob.n_spin_orbitals == 4
    assert [o.irrep for o in prob.orbitals] == ["ag", "ag", "b1u", "b1u"]
    prob.check_symmetry()
    body = path.read_text().split("&END")[1].split("\n")
    for line in filter(None, (l.strip() for l in body)):
        v, i, j, k, l = line.split()
        v, i, j, k, l = float(v), int(i), int(j), int(k), int(l)
        if i == 0:
            assert prob.h_nuc == v
        elif k == 0:
            assert prob.h_one[2 * (i - 1), 2 * (j - 1)] == v
        else:
            # chemist (ij|kl) = physicist <ik|jl>, same spin on each electron
            assert prob.h_two[2 * (i - 1), 2 * (k - 1) + 1, 2 * (j - 1), 2 * (l - 1) + 1] == v


def test_parse_errors(tmp_path):
    with pytest.raises(ParseError) as exc:
        parse_fcidump(write(tmp_path, TOY.replace("0.5 0 0 0 0", "0.5 0 0 0")))
    assert exc.value.line == 5
    with pytest.raises(SchemaError):
        parse_fcidump(write(tmp_path, TOY.replace("-1.0 1 1 0 0", "-1.0 2 2 0 0")))
    with pytest.raises(SchemaError):
        parse_fcidump(write(tmp_path, TOY.replace("CONV=CHEMIST,", "")))
    with pytest.raises(ParseError):
        parse_fcidump(write(tmp_path, TOY.replace("-1.0 1 1", "(1.0,2.0) 1 1")))
    with pytest.raises(InputError):
        parse_fcidump(tmp_path / "missing.fcidump")


def _one_orbital(h11, h_nuc):
    orbs = [SpinOrbital(0, "target", "up", "a", 0)]
    return FermionProblem(np.array([[h11]]), np.zeros((1, 1, 1, 1)), h_nuc, orbs, 0)


def test_second_quantised_single_orbital():
    op = build_second_quantised(_one_orbital(-1.0, 0.0))
    assert op.terms == {((0, True), (0, False)): -1.0}


def test_second_quantised_constant():
    op = build_second_quantised(_one_orbital(0.0, 0.5))
    assert op.terms == {(): 0.5}


def test_h2_ci_matrix():
    prob = parse_fcidump(data_path("h2_sto3g.fcidump"))
    h1, eri = prob.spatial
    # closed-shell singlet CI in {|g g~|, |u u~|}
    ci = np.array([
        [2 * h1[0, 0] + eri[0, 0, 0, 0], eri[0, 1, 0, 1]],
        [eri[0, 1, 0, 1], 2 * h1[1, 1] + eri[1, 1, 1, 1]],
    ]) + prob.h_nuc * np.eye(2)
    dense = fermion_matrix(build_second_quantised(prob), 4)
    rows = [0b0011, 0b1100]
    assert np.allclose(dense[np.ix_(rows, rows)], ci, atol=1e-12)
    assert np.linalg.eigvalsh(ci)[0] == pytest.approx(H2_TARGET_GROUND, abs=1e-10)


def test_jw_number_operator():
    op = jordan_wigner(FermionOperator({((0, True), (0, False)): 1.0}))
    assert op.allclose(PauliSum.from_list([(0.5, "I"), (-0.5, "Z0")], 1), atol=1e-15)


def test_jw_hopping():
    op = jordan_wigner(FermionOperator({((0, True), (1, False)): 1.0, ((1, True), (0, False)): 1.0}))
    assert op.allclose(PauliSum.from_list([(0.5, "X0 X1"), (0.5, "Y0 Y1")], 2), atol=1e-15)


def test_jw_h2_matches_fermion_matrix():
    prob = parse_fcidump(data_path("h2_sto3g.fcidump"))
    H = qubit_hamiltonian(prob)
    assert H.hermitian
    dense = fermion_matrix(build_second_quantised(prob), 4)
    assert np.abs(H.to_matrix() - dense).max() < 1e-10


def _ladder(p, creation, n):
    return jordan_wigner(FermionOperator({((p, creation),): 1.0}, n), n).to_matrix()


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.data())
def test_jw_anticommutation(n, data):
    p = data.draw(st.integers(0, n - 1))
    q = data.draw(st.integers(0, n - 1))
    a_p, a_q = _ladder(p, False, n), _ladder(q, False, n)
    ad_q = _ladder(q, True, n)
    eye = np.eye(1 << n)
    assert np.allclose(a_p @ ad_q + ad_q @ a_p, (p == q) * eye, atol=1e-12)
    assert np.allclose(a_p @ a_q + a_q @ a_p, 0, atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 50))
def test_jw_spectrum_preserved(seed):
    prob = random_problem(seed).restrict(range(6))
    H = qubit_hamiltonian(prob)
    assert H.hermitian
    e_jw = np.linalg.eigvalsh(H.to_matrix())
    e_det = np.linalg.eigvalsh(fermion_matrix(build_second_quantised(prob), 6))
    assert np.abs(e_jw - e_det).max() < 1e-9


def test_s_squared_on_singlet_and_triplet():
    prob = parse_fcidump(data_path("h2_sto3g.fcidump"))
    s2 = s_squared_operator(prob.orbitals).to_matrix()
    up_up = 0b0101  # g-up, u-up
    assert s2[up_up, up_up] == pytest.approx(2.0)
    assert s2[0b0011, 0b0011] == pytest.approx(0.0)
