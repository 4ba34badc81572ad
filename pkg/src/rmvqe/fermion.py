"""Inner-region integrals, the second-quantised Hamiltonian and its qubit image.

Spin-orbitals are interleaved: spatial orbital ``p`` (0-based) owns spin-orbital
``2p`` (spin up) and ``2p + 1`` (spin down).  Two-electron integrals are stored
in physicist order, ``h_two[p, q, r, s] = <pq|rs> = (pr|qs)``, and enter the
Hamiltonian as ``1/2 sum <pq|rs> a+_p a+_q a_s a_r``.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, InputError, ParseError, SchemaError
from .pauli import PauliSum

SYM_TOL = 1e-10

TARGET = "target"
CONTINUUM = "continuum"
UP = "up"
DOWN = "down"


@dataclass(frozen=True)
class SpinOrbital:
    index: int
    register: str
    spin: str
    irrep: str
    spatial_index: int

    @property
    def sz(self) -> float:
        return 0.5 if self.spin == UP else -0.5


@dataclass
class FermionProblem:
    """Spin-orbital integrals plus per-orbital metadata."""

    h_one: np.ndarray
    h_two: np.ndarray
    h_nuc: float
    orbitals: list[SpinOrbital]
    n_target_electrons: int
    boundary_amplitudes: dict = field(default_factory=dict)
    ms2: int = 0
    #: spatial-orbital integrals (h1, chemist ERIs) when built from them
    spatial: tuple | None = None

    def __post_init__(self):
        n = len(self.orbitals)
        if self.h_one.shape != (n, n) or self.h_two.shape != (n,) * 4:
            raise SchemaError(f"integral arrays do not match {n} spin-orbitals")
        if [o.index for o in self.orbitals] != list(range(n)):
            raise SchemaError("spin-orbital indices must be contiguous from 0")

    @property
    def n_spin_orbitals(self) -> int:
        return len(self.orbitals)

    def qubits(self, register: str) -> list[int]:
        return [o.index for o in self.orbitals if o.register == register]

    def check_symmetry(self, tol: float = SYM_TOL) -> None:
        if not np.allclose(self.h_one, self.h_one.T, atol=tol, rtol=0):
            raise DomainError("one-electron integrals are not symmetric")
        g = self.h_two
        for perm in ((1, 0, 3, 2), (2, 3, 0, 1), (2, 1, 0, 3), (0, 3, 2, 1)):
            if not np.allclose(g, g.transpose(perm), atol=tol, rtol=0):
                raise DomainError(f"two-electron integrals break the {perm} symmetry")

    def restrict(self, keep: Sequence[int]) -> "FermionProblem":
        """Keep only the listed spin-orbitals, renumbered in the given order.

        Valid for sectors in which the dropped spin-orbitals are never occupied.
        """
        keep = list(keep)
        if len(set(keep)) != len(keep):
            raise DomainError("duplicate spin-orbital in restriction")
        ix = np.ix_(keep, keep)
        h2 = self.h_two[np.ix_(keep, keep, keep, keep)]
        orbs = [replace(self.orbitals[k], index=i) for i, k in enumerate(keep)]
        kept = set(keep)
        amps = {
            key: v for key, v in self.boundary_amplitudes.items() if key[1] in kept
        }
        return FermionProblem(
            self.h_one[ix].copy(), h2.copy(), self.h_nuc, orbs,
            self.n_target_electrons, amps, self.ms2,
        )

    def target_block(self) -> "FermionProblem":
        return self.restrict(self.qubits(TARGET))


# --------------------------------------------------------------------- FCIDUMP

_KEY = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*=")


def _parse_namelist(text: str) -> dict[str, list[str]]:
    body = re.sub(r"^\s*&FCI", "", text.strip(), flags=re.IGNORECASE)
    body = re.sub(r"(&END|/)\s*$", "", body.strip(), flags=re.IGNORECASE)
    body = " ".join(body.split())
    keys = list(_KEY.finditer(body))
    out: dict[str, list[str]] = {}
    for i, m in enumerate(keys):
        end = keys[i + 1].start() if i + 1 < len(keys) else len(body)
        raw = body[m.end():end].strip().strip(",")
        vals = [v.strip().strip("'\"") for v in raw.split(",") if v.strip()]
        out[m.group(1).upper()] = vals
    return out


_D2H_MOLPRO = {1: "ag", 2: "b3u", 3: "b2u", 4: "b1g", 5: "b1u", 6: "b2g", 7: "b3g", 8: "au"}


def parse_fcidump(path: str | Path) -> FermionProblem:
    """Read an FCIDUMP-style integral file.

    The namelist must declare ``NORB``, ``NELEC`` (the target electron count
    ``N``), ``MS2`` and ``CONV`` (``CHEMIST`` or ``PHYSICIST``).  Optional
    ``REGISTER`` (``T``/``C`` per spatial orbital, default all target),
    ``IRREP`` labels and ``ORBSYM`` (Molpro D2h numbering) tag the orbitals.
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read integral file {path}: {exc}") from None
    header: list[str] = []
    body_start = None
    for i, line in enumerate(lines):
        header.append(line)
        if re.search(r"&END|^\s*/\s*$", line, flags=re.IGNORECASE):
            body_start = i + 1
            break
    if body_start is None:
        raise ParseError("namelist header not terminated by &END", path=str(path))
    nl = _parse_namelist("\n".join(header))

    def scalar(key: str) -> int:
        if key not in nl or len(nl[key]) != 1:
            raise SchemaError(f"{path}: header must declare {key}")
        try:
            return int(nl[key][0])
        except ValueError:
            raise SchemaError(f"{path}: {key} must be an integer") from None

    norb = scalar("NORB")
    nelec = scalar("NELEC")
    ms2 = scalar("MS2")
    conv = nl.get("CONV", [None])[0]
    if conv is None or conv.upper() not in ("CHEMIST", "PHYSICIST"):
        raise SchemaError(f"{path}: header must declare CONV=CHEMIST or CONV=PHYSICIST")
    conv = conv.upper()

    registers = nl.get("REGISTER", ["T"] * norb)
    if len(registers) != norb:
        raise SchemaError(f"{path}: REGISTER lists {len(registers)} entries for NORB={norb}")
    reg_names = []
    for r in registers:
        if r.upper() not in ("T", "C"):
            raise SchemaError(f"{path}: REGISTER entries must be T or C, got {r!r}")
        reg_names.append(TARGET if r.upper() == "T" else CONTINUUM)
    if "IRREP" in nl:
        irreps = [s.lower() for s in nl["IRREP"]]
    elif "ORBSYM" in nl:
        irreps = [_D2H_MOLPRO.get(int(s), s) for s in nl["ORBSYM"]]
    else:
        irreps = ["a"] * norb
    if len(irreps) != norb:
        raise SchemaError(f"{path}: {len(irreps)} irrep labels for NORB={norb}")

    h1 = np.zeros((norb, norb))
    chem = np.zeros((norb,) * 4)
    seen1 = np.zeros((norb, norb), dtype=bool)
    seen2 = np.zeros((norb,) * 4, dtype=bool)
    h_nuc = 0.0
    for lineno in range(body_start, len(lines)):
        text = lines[lineno].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 5:
            raise ParseError("expected 'value i j k l'", line=lineno + 1, path=str(path))
        if "(" in parts[0] or "j" in parts[0].lower():
            raise ParseError("complex integrals are not supported", line=lineno + 1, path=str(path))
        try:
            val = float(parts[0].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(p) for p in parts[1:])
        except ValueError:
            raise ParseError(f"malformed integral line {text!r}", line=lineno + 1, path=str(path)) from None
        if min(i, j, k, l) < 0 or max(i, j, k, l) > norb:
            raise SchemaError(
                f"{path}:{lineno + 1}: orbital index out of range 1..{norb} in {text!r}"
            )
        if i == j == k == l == 0:
            h_nuc = val
        elif k == 0 and l == 0 and j == 0:
            continue  # orbital energy line
        elif k == 0 and l == 0:
            for a, b in ((i - 1, j - 1), (j - 1, i - 1)):
                if seen1[a, b] and abs(h1[a, b] - val) > SYM_TOL:
                    raise SchemaError(f"{path}:{lineno + 1}: one-electron integral conflicts with its transpose")
                h1[a, b] = val
                seen1[a, b] = True
        elif 0 in (i, j, k, l):
            raise ParseError(f"malformed index pattern in {text!r}", line=lineno + 1, path=str(path))
        else:
            p, q, r, s = i - 1, j - 1, k - 1, l - 1
            if conv == "PHYSICIST":  # <pq|rs> = (pr|qs)
                p, q, r, s = p, r, q, s
            for idx in _chem_images(p, q, r, s):
                if seen2[idx] and abs(chem[idx] - val) > SYM_TOL:
                    raise SchemaError(
                        f"{path}:{lineno + 1}: two-electron integral conflicts with a symmetry image"
                    )
                chem[idx] = val
                seen2[idx] = True

    return build_problem(h1, chem, h_nuc, reg_names, irreps, nelec, ms2)


def _chem_images(p, q, r, s):
    return {
        (p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r),
        (r, s, p, q), (s, r, p, q), (r, s, q, p), (s, r, q, p),
    }


def build_problem(
    h1_spatial: np.ndarray,
    eri_chem: np.ndarray,
    h_nuc: float,
    registers: Sequence[str],
    irreps: Sequence[str],
    n_target_electrons: int,
    ms2: int = 0,
) -> FermionProblem:
    """Expand spatial integrals (chemist ERIs) into the interleaved spin-orbital basis."""
    norb = h1_spatial.shape[0]
    n = 2 * norb
    h_one = np.zeros((n, n))
    h_one[0::2, 0::2] = h1_spatial
    h_one[1::2, 1::2] = h1_spatial
    phys = eri_chem.transpose(0, 2, 1, 3)
    h_two = np.zeros((n,) * 4)
    for s1 in (0, 1):
        for s2 in (0, 1):
            h_two[s1::2, s2::2, s1::2, s2::2] = phys
    orbitals = [
        SpinOrbital(2 * p + s, registers[p], UP if s == 0 else DOWN, irreps[p], p)
        for p in range(norb)
        for s in (0, 1)
    ]
    spatial = (np.array(h1_spatial, dtype=float), np.array(eri_chem, dtype=float))
    return FermionProblem(
        h_one, h_two, float(h_nuc), orbitals, n_target_electrons, ms2=ms2, spatial=spatial
    )


def write_fcidump(
    path: str | Path,
    h1: np.ndarray,
    eri_chem: np.ndarray,
    h_nuc: float,
    nelec: int,
    ms2: int = 0,
    registers: Sequence[str] | None = None,
    irreps: Sequence[str] | None = None,
    tol: float = 1e-14,
) -> None:
    norb = h1.shape[0]
    head = [f" &FCI NORB={norb},NELEC={nelec},MS2={ms2},"]
    if registers is not None:
        head.append("  REGISTER=" + ",".join("T" if r == TARGET else "C" for r in registers) + ",")
    if irreps is not None:
        head.append("  IRREP=" + ",".join(irreps) + ",")
    head.append("  CONV=CHEMIST,")
    head.append(" &END")
    out = head
    fmt = "{:24.16e} {:4d} {:4d} {:4d} {:4d}"
    for i in range(norb):
        for j in range(i + 1):
            ij = i * (i + 1) // 2 + j
            for k in range(norb):
                for l in range(k + 1):
                    kl = k * (k + 1) // 2 + l
                    if ij >= kl and abs(eri_chem[i, j, k, l]) > tol:
                        out.append(fmt.format(eri_chem[i, j, k, l], i + 1, j + 1, k + 1, l + 1))
    for i in range(norb):
        for j in range(i + 1):
            if abs(h1[i, j]) > tol:
                out.append(fmt.format(h1[i, j], i + 1, j + 1, 0, 0))
    out.append(fmt.format(h_nuc, 0, 0, 0, 0))
    Path(path).write_text("\n".join(out) + "\n")


# ------------------------------------------------------------ fermion operator

Ladder = tuple[int, bool]  # (mode, is_creation)


class FermionOperator:
    """Sum of products of ladder operators; ``()`` is the constant term."""

    def __init__(self, terms: Mapping[tuple[Ladder, ...], float] | None = None, n_modes: int = 0):
        self.terms: dict[tuple[Ladder, ...], complex] = {}
        for k, v in (terms or {}).items():
            if v != 0:
                self.terms[tuple(k)] = self.terms.get(tuple(k), 0) + v
        modes = [m for k in self.terms for m, _ in k]
        self.n_modes = max([n_modes] + [m + 1 for m in modes])

    def __add__(self, other: "FermionOperator") -> "FermionOperator":
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms.get(k, 0) + v
        return FermionOperator(terms, max(self.n_modes, other.n_modes))

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        parts = []
        for k, v in self.terms.items():
            ops = " ".join(f"a{m}{'^' if d else ''}" for m, d in k) or "1"
            parts.append(f"{v:+.6g} {ops}")
        return "FermionOperator(" + " ".join(parts) + ")"


def build_second_quantised(
    problem: FermionProblem, zero_continuum_pairs: bool = False, tol: float = 0.0
) -> FermionOperator:
    """``sum h_pq a+_p a_q + 1/2 sum <pq|rs> a+_p a+_q a_s a_r + h_nuc``.

    ``zero_continuum_pairs`` drops two-electron terms that create or destroy two
    continuum electrons at once; such terms never act inside the projected space.
    """
    n = problem.n_spin_orbitals
    spins = [o.spin for o in problem.orbitals]
    cont = [o.register == CONTINUUM for o in problem.orbitals]
    terms: dict[tuple[Ladder, ...], float] = {}
    if problem.h_nuc != 0:
        terms[()] = problem.h_nuc
    for p in range(n):
        for q in range(n):
            v = problem.h_one[p, q]
            if spins[p] != spins[q] or abs(v) <= tol:
                continue
            terms[((p, True), (q, False))] = v
    g = problem.h_two
    for p, q, r, s in zip(*np.nonzero(np.abs(g) > tol)):
        if p == q or r == s:
            continue  # a+_p a+_p = 0
        if zero_continuum_pairs and ((cont[p] and cont[q]) or (cont[r] and cont[s])):
            continue
        key = ((int(p), True), (int(q), True), (int(s), False), (int(r), False))
        terms[key] = terms.get(key, 0.0) + 0.5 * g[p, q, r, s]
    return FermionOperator(terms, n)


@functools.lru_cache(maxsize=None)
def _ladder_image(mode: int, creation: bool, n_qubits: int) -> PauliSum:
    z_string = (1 << mode) - 1
    x = 1 << mode
    # a = (X + iY)/2, a+ = (X - iY)/2, each behind a Z parity string
    sign = -0.5j if creation else 0.5j
    return PauliSum(n_qubits, {(x, z_string): 0.5, (x, z_string | x): sign})


def jordan_wigner(op: FermionOperator, n_qubits: int | None = None) -> PauliSum:
    """Map ``a_p -> Z_0...Z_{p-1} (X_p + iY_p)/2`` and simplify the result.

    The image is flagged Hermitian when all coefficients come out real.
    """
    n = op.n_modes if n_qubits is None else n_qubits
    if op.n_modes > n:
        raise DomainError(f"operator uses {op.n_modes} modes but register has {n} qubits")
    acc: dict[tuple[int, int], complex] = {}
    for key, coeff in op.terms.items():
        prod = PauliSum.identity(n, coeff)
        for mode, creation in key:
            prod = prod @ _ladder_image(mode, creation, n)
        for k, v in prod:
            acc[k] = acc.get(k, 0j) + v
    out = PauliSum(n, acc)
    if out.is_hermitian():
        out = out.as_hermitian()
    return out


def qubit_hamiltonian(problem: FermionProblem, zero_continuum_pairs: bool = False) -> PauliSum:
    return jordan_wigner(
        build_second_quantised(problem, zero_continuum_pairs), problem.n_spin_orbitals
    )


# --------------------------------------------------------------- spin algebra

def sz_operator(orbitals: Sequence[SpinOrbital], n_qubits: int | None = None) -> PauliSum:
    n = len(orbitals) if n_qubits is None else n_qubits
    terms = {(0, 0): 0.0}
    for o in orbitals:
        # sz * (I - Z)/2
        terms[(0, 0)] += 0.5 * o.sz
        terms[(0, 1 << o.index)] = -0.5 * o.sz
    return PauliSum(n, terms, hermitian=True)


def s_squared_operator(orbitals: Sequence[SpinOrbital], n_qubits: int | None = None) -> PauliSum:
    """Total ``S^2 = S- S+ + Sz (Sz + 1)`` on the listed spin-orbitals."""
    n = len(orbitals) if n_qubits is None else n_qubits
    by_spatial: dict[int, dict[str, int]] = {}
    for o in orbitals:
        by_spatial.setdefault(o.spatial_index, {})[o.spin] = o.index
    raise_terms = {}
    for pair in by_spatial.values():
        if UP in pair and DOWN in pair:
            raise_terms[((pair[UP], True), (pair[DOWN], False))] = 1.0
    s_plus = jordan_wigner(FermionOperator(raise_terms, n), n)
    s_minus = s_plus.adjoint()
    sz = sz_operator(orbitals, n)
    return (s_minus @ s_plus + sz @ sz + sz).simplify().as_hermitian()


def number_of_electrons(orbitals: Iterable[SpinOrbital], n_qubits: int) -> PauliSum:
    from .pauli import total_number

    return total_number([o.index for o in orbitals], n_qubits)
