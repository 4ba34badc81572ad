"""Electron-number projectors written as Pauli-Z polynomials."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import DimensionError, DomainError, LayoutError
from .pauli import PauliSum, multiply


@dataclass(frozen=True)
class ProjectorSpec:
    """Register ``qubit_set`` constrained to hold ``occupancy`` electrons."""

    qubit_set: tuple[int, ...]
    occupancy: int

    def __post_init__(self):
        object.__setattr__(self, "qubit_set", tuple(int(q) for q in self.qubit_set))
        if not self.qubit_set:
            raise DomainError("projector register is empty")
        if len(set(self.qubit_set)) != len(self.qubit_set):
            raise DomainError(f"duplicate qubit in register {self.qubit_set}")
        if not 0 <= self.occupancy <= len(self.qubit_set):
            raise DomainError(
                f"occupancy {self.occupancy} outside 0..{len(self.qubit_set)}"
            )


def number_projector(spec: ProjectorSpec, n_qubits: int) -> PauliSum:
    """Lagrange polynomial in the register's number operator.

    ``P_n = prod_{m != n} (N - m) / (n - m)`` over ``m = 0..|set|``.  The
    expansion runs in exact rationals; every final coefficient is dyadic, so
    the float conversion is exact and ``P @ P == P`` holds bit for bit.
    """
    if max(spec.qubit_set) >= n_qubits or min(spec.qubit_set) < 0:
        raise DimensionError(f"register {spec.qubit_set} exceeds {n_qubits} qubits")
    size = len(spec.qubit_set)
    n = spec.occupancy
    # N = |set|/2 - 1/2 sum Z_i, kept as {z-mask: Fraction}
    number = {0: Fraction(size, 2)}
    for q in spec.qubit_set:
        number[1 << q] = Fraction(-1, 2)
    poly = {0: Fraction(1)}
    denom = 1
    for m in range(size + 1):
        if m == n:
            continue
        denom *= n - m
        factor = dict(number)
        factor[0] -= m
        poly = _zpoly_product(poly, factor)
    terms = {(0, z): float(c / denom) for z, c in poly.items() if c != 0}
    return PauliSum(n_qubits, terms, hermitian=True)


def _zpoly_product(a: dict, b: dict) -> dict:
    out: dict[int, Fraction] = {}
    for za, ca in a.items():
        for zb, cb in b.items():
            z = za ^ zb
            out[z] = out.get(z, 0) + ca * cb
    return out


def _clean(op: PauliSum) -> PauliSum:
    return PauliSum(op.n_qubits, {k: c.real for k, c in op}, hermitian=True)


def inner_region_projector(
    target_set: Sequence[int], continuum_set: Sequence[int], N: int, n_qubits: int
) -> PauliSum:
    """``P_{t,N+1} P_{c,0} + P_{t,N} P_{c,1}``.

    An empty continuum register leaves only ``P_{t,N+1}``.  A branch whose
    target occupancy exceeds the register size is the zero operator.
    """
    target_set = tuple(target_set)
    continuum_set = tuple(continuum_set)
    if set(target_set) & set(continuum_set):
        raise LayoutError(
            f"target {target_set} and continuum {continuum_set} registers overlap"
        )

    def target(n):
        if n > len(target_set) or n < 0:
            return PauliSum.zero(n_qubits)
        return number_projector(ProjectorSpec(target_set, n), n_qubits)

    if not continuum_set:
        return target(N + 1)
    c0 = number_projector(ProjectorSpec(continuum_set, 0), n_qubits)
    c1 = number_projector(ProjectorSpec(continuum_set, 1), n_qubits)
    out = multiply(target(N + 1), c0) + multiply(target(N), c1)
    return _clean(out)


def conjugate_by_projector(H: PauliSum, P: PauliSum) -> PauliSum:
    """The simplified product ``H P H``."""
    if H.n_qubits != P.n_qubits:
        raise DimensionError(f"operands act on {H.n_qubits} and {P.n_qubits} qubits")
    out = multiply(multiply(H, P), H)
    if H.hermitian and P.hermitian and out.is_hermitian():
        out = out.as_hermitian()
    return out
