"""Reference values for the tests, computed without the package's own operator code.

Reads the committed FCIDUMP files with pyscf, builds Hamiltonian and S^2
matrices in pyscf's determinant basis, restricts them to the projected
scattering sector, and diagonalises with numpy.  The printed numbers are
frozen into tests/reference.py.  Needs pyscf (not a package dependency).
"""

import itertools
from pathlib import Path

import numpy as np
from pyscf import fci

DATA = Path(__file__).resolve().parents[1] / "src" / "rmvqe" / "data"
IRREP_BIT = {"ag": 0, "b1u": 5}  # D2h as XOR group; only these two labels occur


def read_fcidump(path, norb):
    """Chemist-order integrals from the body lines (header keys are not needed)."""
    lines = Path(path).read_text().splitlines()
    body = lines[next(i for i, l in enumerate(lines) if "&END" in l.upper()) + 1:]
    h1 = np.zeros((norb, norb))
    eri = np.zeros((norb,) * 4)
    ecore = 0.0
    for line in body:
        v, i, j, k, l = line.split()
        v = float(v)
        i, j, k, l = int(i) - 1, int(j) - 1, int(k) - 1, int(l) - 1
        if i < 0:
            ecore = v
        elif k < 0:
            h1[i, j] = h1[j, i] = v
        else:
            for a, b, c, d in ((i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k)):
                eri[a, b, c, d] = eri[c, d, a, b] = v
    return h1, eri, ecore


def dense(op, norb, nelec):
    na = fci.cistring.num_strings(norb, nelec[0])
    nb = fci.cistring.num_strings(norb, nelec[1])
    m = np.zeros((na * nb, na * nb))
    for col in range(na * nb):
        v = np.zeros(na * nb)
        v[col] = 1.0
        m[:, col] = op(v.reshape(na, nb)).ravel()
    return m


def target_reference():
    norb = 2
    h1, eri, ecore = read_fcidump(DATA / "h2_sto3g.fcidump", norb)
    e, c = fci.direct_spin1.kernel(h1, eri, norb, (1, 1), ecore=ecore, nroots=1)
    # closed-shell determinants: alpha and beta strings equal
    return e, abs(c[0, 0]), abs(c[1, 1])


def scattering_reference(h1, eri, ecore):
    norb = 4
    irreps = ["ag", "b1u", "ag", "b1u"]
    continuum = {2, 3}
    nelec = (2, 1)
    h2e = fci.direct_spin1.absorb_h1e(h1, eri, norb, nelec, 0.5)
    H = dense(lambda v: fci.direct_spin1.contract_2e(h2e, v, norb, nelec), norb, nelec) + ecore * np.eye(24)
    S2 = dense(lambda v: fci.spin_op.contract_ss(v, norb, nelec), norb, nelec)
    a_str = fci.cistring.make_strings(range(norb), nelec[0])
    b_str = fci.cistring.make_strings(range(norb), nelec[1])
    keep = []
    for ia, ib in itertools.product(range(len(a_str)), range(len(b_str))):
        occ_a = [p for p in range(norb) if a_str[ia] >> p & 1]
        occ_b = [p for p in range(norb) if b_str[ib] >> p & 1]
        if 3 in occ_b:
            continue  # b1u spin-down continuum orbital is dropped from the register
        if sum(p in continuum for p in occ_a + occ_b) > 1:
            continue
        sym = 0
        for p in occ_a + occ_b:
            sym ^= IRREP_BIT[irreps[p]]
        if sym != IRREP_BIT["b1u"]:
            continue
        keep.append(ia * len(b_str) + ib)
    h = H[np.ix_(keep, keep)]
    s2 = S2[np.ix_(keep, keep)]
    w, v = np.linalg.eigh(s2)
    doublets = v[:, np.abs(w - 0.75) < 1e-8]
    return len(keep), np.linalg.eigvalsh(doublets.T @ h @ doublets)


def main():
    e, c0, c1 = target_reference()
    print(f"H2_TARGET_GROUND = {e:.12f}")
    print(f"H2_CI = ({c0:.12f}, {c1:.12f})")
    dim, energies = scattering_reference(*read_fcidump(DATA / "h2_scattering.fcidump", 4))
    print(f"H2_SECTOR_DIM = {dim}")
    print("H2_SCATTERING_SPECTRUM = [" + ", ".join(f"{x:.12f}" for x in energies) + "]")
    # seeded random fixtures: only the integral generator comes from the package
    from rmvqe.fixtures import random_integrals

    print("RANDOM_SPECTRA = {")
    for seed in range(3):
        _, energies = scattering_reference(*random_integrals(seed))
        print(f"    {seed}: [" + ", ".join(f"{x:.12f}" for x in energies) + "],")
    print("}")


if __name__ == "__main__":
    main()
