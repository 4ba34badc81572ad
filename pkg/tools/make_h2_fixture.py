"""Regenerate the committed H2 integral fixtures (needs pyscf, not a package dependency).

H2 at R = 1.4 bohr.  Target orbitals are the STO-3G RHF sigma_g / sigma_u
orbitals.  Two extra "continuum" orbitals come from one diffuse s Gaussian per
hydrogen (exponent 0.1): their gerade and ungerade combinations,
orthogonalised against the target orbital of the same symmetry.

Writes:
    src/rmvqe/data/h2_sto3g.fcidump       target-only (2 spatial orbitals)
    src/rmvqe/data/h2_scattering.fcidump  target + continuum (4 spatial orbitals)
"""

from pathlib import Path

import numpy as np
from pyscf import ao2mo, gto, scf

from rmvqe.fermion import CONTINUUM, TARGET, write_fcidump

R = 1.4
DIFFUSE = 0.1
OUT = Path(__file__).resolve().parents[1] / "src" / "rmvqe" / "data"


def target_orbitals():
    mol = gto.M(atom=f"H 0 0 0; H 0 0 {R}", unit="bohr", basis="sto-3g")
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.kernel()
    # fix orbital signs: positive coefficient on the first atom
    c = mf.mo_coeff * np.sign(mf.mo_coeff[0])
    return mol, c


def main():
    mol, c_t = target_orbitals()
    basis = {"H": gto.basis.load("sto-3g", "H") + [[0, [DIFFUSE, 1.0]]]}
    big = gto.M(atom=f"H 0 0 0; H 0 0 {R}", unit="bohr", basis=basis)
    s = big.intor("int1e_ovlp")
    # AO order per atom: [sto-3g 1s, diffuse s]
    c = np.zeros((4, 4))
    c[[0, 2], 0] = c_t[:, 0]
    c[[0, 2], 1] = c_t[:, 1]
    d_g = np.array([0, 1, 0, 1.0])
    d_u = np.array([0, 1, 0, -1.0])
    for col, d, ref in ((2, d_g, 0), (3, d_u, 1)):
        v = d - c[:, ref] * (c[:, ref] @ s @ d)
        c[:, col] = v / np.sqrt(v @ s @ v)
    assert np.allclose(c.T @ s @ c, np.eye(4), atol=1e-12)

    h1 = c.T @ (big.intor("int1e_kin") + big.intor("int1e_nuc")) @ c
    eri = ao2mo.restore(1, ao2mo.full(big, c), 4)
    e_nuc = big.energy_nuc()

    tgt = slice(0, 2)
    write_fcidump(
        OUT / "h2_sto3g.fcidump", h1[tgt, tgt], eri[tgt, tgt, tgt, tgt], e_nuc, nelec=2,
        registers=[TARGET, TARGET], irreps=["ag", "b1u"],
    )
    write_fcidump(
        OUT / "h2_scattering.fcidump", h1, eri, e_nuc, nelec=2,
        registers=[TARGET, TARGET, CONTINUUM, CONTINUUM], irreps=["ag", "b1u", "ag", "b1u"],
    )
    # continuum orbital values on the bond axis at r = 5 bohr from the centre,
    # recorded only as plausible boundary amplitudes for the run config
    pt = np.array([[0.0, 0.0, R / 2 + 5.0]])
    ao = big.eval_gto("GTOval", pt)
    print("orbital values at r=5:", (ao @ c)[0])


if __name__ == "__main__":
    main()
