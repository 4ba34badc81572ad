"""Brute-force reference computations used to validate the variational route.

Nothing here touches the optimiser or the circuit simulator: sector bases are
enumerated bit by bit, Hamiltonian matrices are assembled from the action of
single Pauli words on basis states, and eigenpairs come from a cyclic Jacobi
sweep.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, InputError
from .fermion import FermionOperator, SpinOrbital
from .pauli import PauliSum

# D2h as Z2^3: (C2 about z, C2 about y) bits plus inversion parity
D2H_LABELS = ("ag", "b1g", "b2g", "b3g", "au", "b1u", "b2u", "b3u")
D2H_PRODUCT = {
    (a, b): D2H_LABELS[i ^ j]
    for (i, a), (j, b) in itertools.product(enumerate(D2H_LABELS), repeat=2)
}


@dataclass(frozen=True)
class IrrepFilter:
    """Keep configurations whose orbital-irrep product equals ``target``."""

    target: str
    table: Mapping[tuple[str, str], str] = field(default_factory=lambda: D2H_PRODUCT)
    identity: str = "ag"

    def product(self, labels: Iterable[str]) -> str:
        out = self.identity
        for lab in labels:
            try:
                out = self.table[(out, lab)]
            except KeyError:
                raise DomainError(f"irrep product table has no entry for ({out}, {lab})") from None
        return out


@dataclass
class SectorBasis:
    bitstrings: list[int]
    n_qubits: int
    index_map: dict[int, int] = field(init=False)

    def __post_init__(self):
        self.bitstrings = sorted(int(b) for b in self.bitstrings)
        self.index_map = {b: i for i, b in enumerate(self.bitstrings)}

    def __len__(self):
        return len(self.bitstrings)

    def occupations(self, row: int) -> tuple[int, ...]:
        b = self.bitstrings[row]
        return tuple(q for q in range(self.n_qubits) if (b >> q) & 1)

    def embed(self, full: np.ndarray) -> np.ndarray:
        """Sector coordinates of a dense ``2**n`` vector (rows of a batch)."""
        return np.asarray(full)[..., self.bitstrings]


def _popcount(v: int) -> int:
    return bin(v).count("1")


def enumerate_sector(
    layout,
    N: int,
    Sz: float | None = None,
    irrep_filter: IrrepFilter | None = None,
    orbitals: Sequence[SpinOrbital] | None = None,
) -> SectorBasis:
    """Bitstrings with ``N + 1`` target electrons and an empty continuum, or
    ``N`` target electrons and one continuum electron.

    Args:
        layout: Anything exposing ``target_qubits`` and ``continuum_qubits``.
        N: Target electron count.
        Sz: Required total spin projection (needs ``orbitals``).
        irrep_filter: Required irrep product (needs ``orbitals``).
        orbitals: Spin-orbital metadata indexed by qubit.
    """
    target = list(layout.target_qubits)
    cont = list(layout.continuum_qubits)
    n = max(target + cont) + 1
    if n > 24:
        raise DomainError(f"sector enumeration refused for {n} qubits")
    if (Sz is not None or irrep_filter is not None) and orbitals is None:
        raise DomainError("spin or irrep filtering needs orbital metadata")
    tmask = sum(1 << q for q in target)
    cmask = sum(1 << q for q in cont)
    out = []
    for b in range(1 << n):
        if b & ~(tmask | cmask):
            continue
        nt, nc = _popcount(b & tmask), _popcount(b & cmask)
        if not ((nt == N + 1 and nc == 0) or (nt == N and nc == 1)):
            continue
        occ = [q for q in range(n) if (b >> q) & 1]
        if Sz is not None:
            if abs(sum(orbitals[q].sz for q in occ) - Sz) > 1e-12:
                continue
        if irrep_filter is not None:
            if irrep_filter.product(orbitals[q].irrep for q in occ) != irrep_filter.target:
                continue
        out.append(b)
    return SectorBasis(out, n)


_I_POW = (1, 1j, -1, -1j)


def dense_hamiltonian(H: PauliSum, basis: SectorBasis, return_leakage: bool = False):
    """Matrix elements ``<r|H|c>`` over the sector, from Pauli action on bitstrings.

    ``P(x, z)|b> = i^{|x&z|} (-1)^{|z&b|} |b ^ x>``.  With
    ``return_leakage`` the largest column norm falling outside the sector is
    returned as well.
    """
    if H.n_qubits < basis.n_qubits:
        raise DomainError("operator register smaller than the sector register")
    dim = len(basis)
    m = np.zeros((dim, dim), dtype=complex)
    leak = np.zeros(dim)
    for col, b in enumerate(basis.bitstrings):
        outside: dict[int, complex] = {}
        for (x, z), c in H:
            amp = c * _I_POW[_popcount(x & z) % 4] * (-1 if _popcount(z & b) & 1 else 1)
            row = basis.index_map.get(b ^ x)
            if row is None:
                outside[b ^ x] = outside.get(b ^ x, 0) + amp
            else:
                m[row, col] += amp
        leak[col] = math.sqrt(sum(abs(v) ** 2 for v in outside.values()))
    if np.abs(m.imag).max(initial=0) < 1e-12:
        m = m.real.copy()
    if return_leakage:
        return m, float(leak.max(initial=0.0))
    return m


def exact_spectrum(matrix: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100):
    """Eigenpairs of a real symmetric matrix by cyclic Jacobi rotations.

    Returns:
        ``(eigenvalues ascending, eigenvectors as columns)``.
    """
    a = np.array(matrix, dtype=float if np.isrealobj(matrix) else complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"expected a square matrix, got shape {a.shape}")
    if np.iscomplexobj(a):
        if np.abs(a.imag).max(initial=0) > tol:
            raise InputError("complex matrix given to the real symmetric eigensolver")
        a = a.real.copy()
    if np.abs(a - a.T).max(initial=0) > tol:
        raise InputError("matrix is not symmetric within tolerance")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.abs(a).max(initial=0.0), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= 1e-15 * scale * n:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * scale:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e100:
                    t = 0.5 / theta  # small-angle limit, avoids overflow
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    else:
        raise InputError("Jacobi iteration did not converge")
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def spin_adapted_spectrum(h: np.ndarray, s2: np.ndarray, S: float, tol: float = 1e-8):
    """Eigenpairs of ``h`` restricted to the ``S(S+1)`` eigenspace of ``s2``.

    Returns:
        ``(energies, vectors)`` with vectors expressed in the original basis.
    """
    w, v = exact_spectrum(s2)
    keep = np.abs(w - S * (S + 1)) < tol
    if not keep.any():
        raise DomainError(f"no states with S={S} in the sector")
    basis = v[:, keep]
    e, u = exact_spectrum(basis.T @ h @ basis)
    return e, basis @ u


def fermion_matrix(op: FermionOperator, n_modes: int, basis: SectorBasis | None = None) -> np.ndarray:
    """Occupation-number matrix of a ladder-operator polynomial.

    Ladder operators act right to left on bitstrings, with the sign
    ``(-1)^(occupied modes below p)``.  With ``basis`` the matrix is restricted
    to that sector; otherwise the full ``2**n`` space is used.
    """
    states = list(range(1 << n_modes)) if basis is None else basis.bitstrings
    index = {b: i for i, b in enumerate(states)}
    m = np.zeros((len(states), len(states)), dtype=complex)
    for key, coeff in op.terms.items():
        for col, b in enumerate(states):
            s, sign = b, 1
            for mode, creation in reversed(key):
                occupied = (s >> mode) & 1
                if occupied == creation:
                    s = None
                    break
                if _popcount(s & ((1 << mode) - 1)) & 1:
                    sign = -sign
                s ^= 1 << mode
            if s is None:
                continue
            row = index.get(s)
            if row is not None:
                m[row, col] += sign * coeff
    if np.abs(m.imag).max(initial=0) < 1e-12:
        m = m.real.copy()
    return m


def branch_double_sum(amplitudes: np.ndarray, n_qubits: int, ancilla: Sequence[int], H: PauliSum) -> float:
    """``sum_ij <psi_i|H|psi_j>`` by explicit slicing over ancilla bitstrings.

    ``H`` acts on the full register with identity on the ancillas.
    """
    ancilla = sorted(ancilla)
    system = [q for q in range(n_qubits) if q not in ancilla]
    hs = H.remove_qubits(ancilla).to_matrix()
    slices = []
    for bits in range(1 << len(ancilla)):
        fixed = sum(((bits >> i) & 1) << q for i, q in enumerate(ancilla))
        idx = [
            fixed | sum(((s >> i) & 1) << q for i, q in enumerate(system))
            for s in range(1 << len(system))
        ]
        slices.append(np.asarray(amplitudes)[idx])
    total = sum(np.vdot(a, hs @ b) for a in slices for b in slices)
    return float(np.real(total))

