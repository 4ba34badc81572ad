"""Weighted Pauli strings and exact operator algebra over them.

A Pauli word on ``n`` qubits is stored as a pair of integer bit masks
``(x, z)``: bit ``q`` of ``x`` is set when the letter on qubit ``q`` is X or Y,
bit ``q`` of ``z`` when it is Z or Y.  ``(1, 1)`` on a qubit is the Hermitian
``Y`` letter, not the product ``XZ``.  Qubit 0 is the least-significant bit of a
computational basis index (little-endian); dense matrices follow the same
convention, so qubit 0 is the right-most Kronecker factor.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .errors import DimensionError, DomainError, ParseError

#: coefficients with magnitude below this are removed after every operation
DROP_TOL = 1e-12
#: largest register for which dense matrices are built
DENSE_LIMIT = 14

_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}
_I_POW = (1, 1j, -1, -1j)
_UNITS = (1, -1, 1j, -1j)

_PAULI_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

_WORD_TOKEN = re.compile(r"^([IXYZ])(\d+)$")


def _popcount(v: int) -> int:
    return v.bit_count()


def _product(x1: int, z1: int, x2: int, z2: int) -> tuple[int, int, int]:
    """Return ``(x, z, k)`` with ``P(x1,z1) P(x2,z2) = i**k P(x, z)``."""
    x = x1 ^ x2
    z = z1 ^ z2
    k = _popcount(x1 & z1) + _popcount(x2 & z2) + 2 * _popcount(z1 & x2) - _popcount(x & z)
    return x, z, k % 4


def _word(x: int, z: int) -> str:
    if x == 0 and z == 0:
        return "I"
    out = []
    q = 0
    v = x | z
    while v >> q:
        if (v >> q) & 1:
            out.append(f"{_BITS_LETTER[((x >> q) & 1, (z >> q) & 1)]}{q}")
        q += 1
    return " ".join(out)


def _parse_word(word: str) -> tuple[int, int, int]:
    """Parse ``"X0 Z2"`` into ``(x, z, highest qubit + 1)``."""
    word = word.strip()
    if word == "I" or word == "":
        return 0, 0, 0
    x = z = 0
    top = 0
    seen = set()
    for tok in word.split():
        m = _WORD_TOKEN.match(tok)
        if m is None:
            raise ValueError(f"bad Pauli token {tok!r}")
        letter, q = m.group(1), int(m.group(2))
        if q in seen:
            raise ValueError(f"qubit {q} repeated in word {word!r}")
        seen.add(q)
        bx, bz = _LETTER_BITS[letter]
        x |= bx << q
        z |= bz << q
        top = max(top, q + 1)
    return x, z, top


@dataclass(frozen=True)
class PauliString:
    """A single Pauli word with a unit phase."""

    n_qubits: int
    x: int = 0
    z: int = 0
    phase: complex = 1

    def __post_init__(self):
        if self.phase not in _UNITS:
            raise DomainError(f"phase must be one of +-1, +-i, got {self.phase!r}")
        if (self.x | self.z) >> self.n_qubits:
            raise DimensionError("Pauli word acts outside the register")

    @classmethod
    def from_letters(cls, letters: str | Iterable[str], phase: complex = 1) -> "PauliString":
        letters = tuple(letters)
        x = z = 0
        for q, letter in enumerate(letters):
            bx, bz = _LETTER_BITS[letter]
            x |= bx << q
            z |= bz << q
        return cls(len(letters), x, z, phase)

    @property
    def letters(self) -> tuple[str, ...]:
        return tuple(
            _BITS_LETTER[((self.x >> q) & 1, (self.z >> q) & 1)] for q in range(self.n_qubits)
        )

    @property
    def word(self) -> str:
        return _word(self.x, self.z)

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.n_qubits != other.n_qubits:
            raise DimensionError(f"{self.n_qubits} vs {other.n_qubits} qubits")
        x, z, k = _product(self.x, self.z, other.x, other.z)
        phase = complex(self.phase * other.phase * _I_POW[k])
        return PauliString(self.n_qubits, x, z, _snap_unit(phase))

    def to_sum(self) -> "PauliSum":
        return PauliSum(self.n_qubits, {(self.x, self.z): complex(self.phase)})


def _snap_unit(c: complex):
    for u in _UNITS:
        if abs(c - u) < 1e-12:
            return u
    raise DomainError(f"{c!r} is not a unit phase")


class PauliSum:
    """Immutable weighted sum of Pauli words on ``n_qubits`` qubits.

    Terms are merged on construction and coefficients smaller than
    :data:`DROP_TOL` are discarded.  ``hermitian=True`` asserts that every
    coefficient is real (within ``1e-10``) and stores the real parts only.
    """

    __slots__ = ("_terms", "_n", "_hermitian", "_compiled", "_dense_cache", "__weakref__")

    def __init__(
        self,
        n_qubits: int,
        terms: Mapping[tuple[int, int], complex] | Iterable[tuple[tuple[int, int], complex]] = (),
        hermitian: bool = False,
        drop_tol: float = DROP_TOL,
    ):
        if n_qubits < 0:
            raise DomainError("negative qubit count")
        items = terms.items() if isinstance(terms, Mapping) else terms
        merged: dict[tuple[int, int], complex] = {}
        limit = 1 << n_qubits
        for key, c in items:
            x, z = key
            if x >= limit or z >= limit or x < 0 or z < 0:
                raise DimensionError(f"term {_word(x, z)} outside {n_qubits}-qubit register")
            merged[key] = merged.get(key, 0j) + complex(c)
        if hermitian:
            for key, c in merged.items():
                if abs(c.imag) > 1e-10:
                    raise DomainError(
                        f"operator flagged Hermitian has complex coefficient {c!r} on {_word(*key)}"
                    )
            merged = {k: complex(c.real, 0.0) for k, c in merged.items()}
        self._terms = {k: c for k, c in merged.items() if abs(c) >= drop_tol}
        self._n = n_qubits
        self._hermitian = hermitian
        self._compiled = None
        self._dense_cache = None

    # ------------------------------------------------------------------ basics
    @classmethod
    def zero(cls, n_qubits: int) -> "PauliSum":
        return cls(n_qubits)

    @classmethod
    def identity(cls, n_qubits: int, coeff: complex = 1.0) -> "PauliSum":
        return cls(n_qubits, {(0, 0): coeff})

    @classmethod
    def from_word(cls, word: str, n_qubits: int, coeff: complex = 1.0) -> "PauliSum":
        x, z, top = _parse_word(word)
        if top > n_qubits:
            raise DimensionError(f"word {word!r} does not fit in {n_qubits} qubits")
        return cls(n_qubits, {(x, z): coeff})

    @classmethod
    def from_list(cls, pairs: Iterable[tuple[complex, str]], n_qubits: int) -> "PauliSum":
        out = []
        for c, word in pairs:
            x, z, top = _parse_word(word)
            if top > n_qubits:
                raise DimensionError(f"word {word!r} does not fit in {n_qubits} qubits")
            out.append(((x, z), c))
        return cls(n_qubits, out)

    @property
    def n_qubits(self) -> int:
        return self._n

    @property
    def terms(self) -> Mapping[tuple[int, int], complex]:
        return MappingProxyType(self._terms)

    @property
    def hermitian(self) -> bool:
        return self._hermitian

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms.items())

    def words(self) -> set[str]:
        return {_word(x, z) for x, z in self._terms}

    def coefficient(self, word: str) -> complex:
        x, z, _ = _parse_word(word)
        return self._terms.get((x, z), 0j)

    def support(self) -> set[int]:
        mask = 0
        for x, z in self._terms:
            mask |= x | z
        return {q for q in range(self._n) if (mask >> q) & 1}

    def is_diagonal(self) -> bool:
        return all(x == 0 for x, _ in self._terms)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return all(abs(c.imag) <= tol for c in self._terms.values())

    def as_hermitian(self) -> "PauliSum":
        """Return the same operator flagged Hermitian (raises if it is not)."""
        return PauliSum(self._n, self._terms, hermitian=True)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self._n == other._n and self._terms == other._terms

    def __hash__(self):
        return hash((self._n, frozenset(self._terms.items())))

    def allclose(self, other: "PauliSum", atol: float = 1e-10) -> bool:
        _check_dims(self, other)
        keys = set(self._terms) | set(other._terms)
        return all(abs(self._terms.get(k, 0j) - other._terms.get(k, 0j)) <= atol for k in keys)

    def __repr__(self) -> str:
        if not self._terms:
            return f"PauliSum(n_qubits={self._n}, 0)"
        body = " + ".join(f"({_fmt(c)})*{_word(*k)}" for k, c in self._sorted())
        return f"PauliSum(n_qubits={self._n}, {body})"

    def _sorted(self):
        return sorted(self._terms.items(), key=lambda kv: _sort_key(*kv[0]))

    # ----------------------------------------------------------------- algebra
    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = PauliSum.identity(self._n, other)
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        if isinstance(other, (int, float, complex)):
            other = PauliSum.identity(self._n, other)
        return add(self, -other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, PauliSum):
            return multiply(self, other)
        if isinstance(other, (int, float, complex, np.number)):
            return self.scale(other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self.scale(other)
        return NotImplemented

    def __matmul__(self, other):
        return multiply(self, other)

    def scale(self, c: complex) -> "PauliSum":
        c = complex(c)
        herm = self._hermitian and c.imag == 0
        return PauliSum(self._n, {k: v * c for k, v in self._terms.items()}, hermitian=herm)

    def adjoint(self) -> "PauliSum":
        return PauliSum(self._n, {k: v.conjugate() for k, v in self._terms.items()})

    def simplify(self, drop_tol: float = DROP_TOL) -> "PauliSum":
        return PauliSum(self._n, self._terms, hermitian=self._hermitian, drop_tol=drop_tol)

    # -------------------------------------------------------- register surgery
    def remove_qubits(self, qubits: Iterable[int]) -> "PauliSum":
        """Drop identity-only qubits and renumber the rest in ascending order."""
        drop = sorted(set(qubits))
        if set(drop) & self.support():
            raise DomainError("cannot remove qubits the operator acts on")
        keep = [q for q in range(self._n) if q not in drop]
        return self.relabel({q: i for i, q in enumerate(keep)}, len(keep))

    def relabel(self, mapping: Mapping[int, int], n_qubits: int) -> "PauliSum":
        """Move qubit ``q`` to ``mapping[q]`` in a register of ``n_qubits``."""
        out = {}
        for (x, z), c in self._terms.items():
            nx = nz = 0
            v = x | z
            q = 0
            while v >> q:
                if (v >> q) & 1:
                    if q not in mapping:
                        raise DomainError(f"qubit {q} has no image in the relabelling")
                    t = mapping[q]
                    nx |= ((x >> q) & 1) << t
                    nz |= ((z >> q) & 1) << t
                q += 1
            out[(nx, nz)] = out.get((nx, nz), 0j) + c
        return PauliSum(n_qubits, out, hermitian=self._hermitian)

    # ------------------------------------------------------------ dense forms
    def to_matrix(self) -> np.ndarray:
        """Dense ``2**n x 2**n`` matrix via Kronecker products (small n only)."""
        if self._n > DENSE_LIMIT:
            raise DomainError(f"dense matrix refused above {DENSE_LIMIT} qubits")
        dim = 1 << self._n
        out = np.zeros((dim, dim), dtype=complex)
        for (x, z), c in self._terms.items():
            m = np.ones((1, 1), dtype=complex)
            for q in reversed(range(self._n)):
                letter = _BITS_LETTER[((x >> q) & 1, (z >> q) & 1)]
                m = np.kron(m, _PAULI_MATS[letter])
            out += c * m
        return out

    def _compile(self):
        if self._compiled is None:
            dim = 1 << self._n
            idx = np.arange(dim, dtype=np.int64)
            groups: dict[int, np.ndarray] = {}
            for (x, z), c in self._terms.items():
                parity = np.bitwise_count(idx & z) & 1
                diag = (c * _I_POW[_popcount(x & z) % 4]) * (1.0 - 2.0 * parity)
                if x in groups:
                    groups[x] = groups[x] + diag
                else:
                    groups[x] = diag.astype(complex)
            self._compiled = [(x, idx ^ x, d) for x, d in sorted(groups.items())]
        return self._compiled

    def _small_dense(self):
        # explicit matrix assembled from the compiled groups, used for n <= 10
        comp = self._compile()
        if self._n > 10:
            return None
        if self._dense_cache is None:
            dim = 1 << self._n
            m = np.zeros((dim, dim), dtype=complex)
            rows = np.arange(dim)
            for _, perm, diag in comp:
                m[rows, perm] += diag[perm]
            if not np.any(m.imag):
                m = m.real.copy()
            self._dense_cache = m
        return self._dense_cache

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """Return ``op @ vec`` term by term; ``vec`` may carry leading batch axes."""
        vec = np.asarray(vec)
        if vec.shape[-1] != 1 << self._n:
            raise DimensionError(f"vector of length {vec.shape[-1]} for {self._n} qubits")
        dense = self._small_dense()
        if dense is not None:
            return vec @ dense.T
        out = np.zeros(vec.shape, dtype=complex)
        for _, perm, diag in self._compile():
            out += (diag * vec)[..., perm]
        return out

    def expectation(self, vec: np.ndarray):
        """``<vec|op|vec>``; batched over leading axes of ``vec``."""
        vec = np.asarray(vec)
        if vec.shape[-1] != 1 << self._n:
            raise DimensionError(f"vector of length {vec.shape[-1]} for {self._n} qubits")
        dense = self._small_dense()
        if dense is not None:
            return np.sum(vec.conj() * (vec @ dense.T), axis=-1)
        total = 0j
        for _, perm, diag in self._compile():
            total = total + np.sum(vec[..., perm].conj() * diag * vec, axis=-1)
        return total

    # ---------------------------------------------------------- serialisation
    def to_text(self) -> str:
        lines = [f"# n_qubits={self._n}"]
        for (x, z), c in self._sorted():
            lines.append(f"{c.real!r} {c.imag!r} {_word(x, z)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n_qubits: int | None = None) -> "PauliSum":
        declared = None
        pairs = []
        top = 0
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = re.match(r"#\s*n_qubits\s*=\s*(\d+)", line)
                if m:
                    declared = int(m.group(1))
                continue
            parts = line.split(None, 2)
            if len(parts) != 3:
                raise ParseError("expected '<re> <im> <word>'", line=lineno)
            try:
                c = complex(float(parts[0]), float(parts[1]))
                x, z, t = _parse_word(parts[2])
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            top = max(top, t)
            pairs.append(((x, z), c))
        n = n_qubits if n_qubits is not None else declared if declared is not None else top
        if top > n:
            raise DimensionError(f"terms reach qubit {top - 1} but register has {n} qubits")
        return cls(n, pairs)


def _fmt(c: complex) -> str:
    if c.imag == 0:
        return f"{c.real:.12g}"
    return f"{c.real:.12g}{c.imag:+.12g}j"


def _sort_key(x: int, z: int):
    # identity first, then by highest qubit touched, then letters ascending by qubit
    v = x | z
    letters = []
    q = 0
    while v >> q:
        letters.append((q, (x >> q) & 1, (z >> q) & 1) if (v >> q) & 1 else (q, 0, 0))
        q += 1
    return (v.bit_length(), tuple(reversed(letters)))


def _check_dims(a: PauliSum, b: PauliSum):
    if a.n_qubits != b.n_qubits:
        raise DimensionError(f"operands act on {a.n_qubits} and {b.n_qubits} qubits")


def add(lhs: PauliSum, rhs: PauliSum) -> PauliSum:
    _check_dims(lhs, rhs)
    terms = dict(lhs.terms)
    for k, c in rhs:
        terms[k] = terms.get(k, 0j) + c
    return PauliSum(lhs.n_qubits, terms, hermitian=lhs.hermitian and rhs.hermitian)


def multiply(lhs: PauliSum, rhs: PauliSum) -> PauliSum:
    """Operator product ``lhs @ rhs`` with merging and drop tolerance applied."""
    _check_dims(lhs, rhs)
    n = lhs.n_qubits
    if not len(lhs) or not len(rhs):
        return PauliSum(n)
    if n > 31 or len(lhs) * len(rhs) < 64:
        out: dict[tuple[int, int], complex] = {}
        for (x1, z1), c1 in lhs:
            for (x2, z2), c2 in rhs:
                x, z, k = _product(x1, z1, x2, z2)
                out[(x, z)] = out.get((x, z), 0j) + c1 * c2 * _I_POW[k]
        return PauliSum(n, out)
    x1, z1, c1 = _as_arrays(lhs)
    x2, z2, c2 = _as_arrays(rhs)
    x1, x2 = np.meshgrid(x1, x2, indexing="ij")
    z1, z2 = np.meshgrid(z1, z2, indexing="ij")
    x = x1 ^ x2
    z = z1 ^ z2
    k = (
        np.bitwise_count(x1 & z1).astype(np.int64)
        + np.bitwise_count(x2 & z2)
        + 2 * np.bitwise_count(z1 & x2)
        - np.bitwise_count(x & z)
    ) % 4
    coeff = np.multiply.outer(c1, c2) * np.asarray(_I_POW)[k]
    keys, inverse = np.unique(((x << n) | z).ravel(), return_inverse=True)
    merged = np.zeros(len(keys), dtype=complex)
    np.add.at(merged, inverse.ravel(), coeff.ravel())
    mask = (1 << n) - 1
    return PauliSum(
        n, (((int(q) >> n, int(q) & mask), c) for q, c in zip(keys, merged))
    )


def _as_arrays(op: PauliSum):
    keys = list(op.terms)
    x = np.fromiter((k[0] for k in keys), dtype=np.int64, count=len(keys))
    z = np.fromiter((k[1] for k in keys), dtype=np.int64, count=len(keys))
    c = np.fromiter(op.terms.values(), dtype=complex, count=len(keys))
    return x, z, c


def count_distinct_terms(op: PauliSum) -> int:
    """Number of stored nonzero terms, identity included."""
    return len(op)


def union_term_count(*ops: PauliSum) -> int:
    """Distinct Pauli words across several operators (shared words counted once)."""
    keys: set[tuple[int, int]] = set()
    for op in ops:
        keys.update(op.terms)
    return len(keys)


@functools.lru_cache(maxsize=None)
def single_qubit(letter: str, qubit: int, n_qubits: int) -> PauliSum:
    return PauliSum.from_word(f"{letter}{qubit}", n_qubits)


def number_operator(qubit: int, n_qubits: int) -> PauliSum:
    """``(I - Z_q)/2``, the occupation of qubit ``q``."""
    return PauliSum(n_qubits, {(0, 0): 0.5, (0, 1 << qubit): -0.5}, hermitian=True)


def total_number(qubits: Iterable[int], n_qubits: int) -> PauliSum:
    qubits = list(qubits)
    terms = {(0, 0): 0.5 * len(qubits)}
    for q in qubits:
        terms[(0, 1 << q)] = -0.5
    return PauliSum(n_qubits, terms, hermitian=True)
