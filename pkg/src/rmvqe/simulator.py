"""Dense statevector simulation of parameterised circuits.

Qubit 0 is the least-significant bit of the basis-state index.  For a
two-qubit gate on operands ``(a, b)`` the local index is ``bit_a + 2*bit_b``,
so the local ket ``|01>`` has qubit ``a`` set.
"""

from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionError, DomainError, LayoutError, ParameterError, ParseError
from .pauli import PauliSum

MAX_QUBITS = 24
NORM_TOL = 1e-10

GATE_ARITY = {"PauliX": 1, "Hadamard": 1, "CNOT": 2, "Givens": 2, "ControlledGivens": 3}
_ANGLED = {"Givens", "ControlledGivens"}


def _check_register(n_qubits: int) -> None:
    if n_qubits > MAX_QUBITS:
        raise DimensionError(f"{n_qubits} qubits exceeds the {MAX_QUBITS}-qubit cap")
    if n_qubits < 0:
        raise DimensionError("negative qubit count")


@dataclass
class Statevector:
    """Normalised amplitudes over ``2**n_qubits`` basis states."""

    amplitudes: np.ndarray
    n_qubits: int

    def __post_init__(self):
        _check_register(self.n_qubits)
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise DimensionError(
                f"{self.amplitudes.shape} amplitudes for {self.n_qubits} qubits"
            )
        norm = np.vdot(self.amplitudes, self.amplitudes).real
        if abs(norm - 1.0) > NORM_TOL:
            raise DomainError(f"state has squared norm {norm!r}")

    @classmethod
    def basis(cls, n_qubits: int, index: int = 0) -> "Statevector":
        _check_register(n_qubits)
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(amps, n_qubits)

    @classmethod
    def from_occupied(cls, n_qubits: int, qubits: Iterable[int]) -> "Statevector":
        return cls.basis(n_qubits, sum(1 << q for q in set(qubits)))

    def inner(self, other: "Statevector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def copy(self) -> "Statevector":
        return Statevector(self.amplitudes.copy(), self.n_qubits)


@dataclass(frozen=True)
class Gate:
    """One circuit element.

    ``angle`` is a float (fixed, radians), a parameter name, or ``None`` for
    unparameterised kinds.  Controls come first in ``qubits``.
    """

    kind: str
    qubits: tuple[int, ...]
    angle: float | str | None = None

    def __post_init__(self):
        if self.kind not in GATE_ARITY:
            raise DomainError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.qubits) != GATE_ARITY[self.kind]:
            raise DomainError(f"{self.kind} takes {GATE_ARITY[self.kind]} qubits, got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise DomainError(f"repeated operand in {self.kind}{self.qubits}")
        if (self.kind in _ANGLED) != (self.angle is not None):
            raise DomainError(f"{self.kind} angle slot mismatch: {self.angle!r}")

    @property
    def is_parametric(self) -> bool:
        return isinstance(self.angle, str)

    def resolve(self, params: Mapping[str, float] | None) -> float:
        if isinstance(self.angle, str):
            if params is None or self.angle not in params:
                raise ParameterError(f"unresolved parameter {self.angle!r}")
            return float(params[self.angle])
        return float(self.angle)

    def to_text(self) -> str:
        parts = ["GATE", self.kind, *map(str, self.qubits)]
        if isinstance(self.angle, str):
            parts.append("$" + self.angle)
        elif self.angle is not None:
            parts.append(repr(float(self.angle)))
        return " ".join(parts)


@dataclass
class ParamCircuit:
    """Ordered gates plus a named parameter table (current values, radians)."""

    n_qubits: int
    gates: list[Gate] = field(default_factory=list)
    params: dict[str, float] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_register(self.n_qubits)
        self.gates = list(self.gates)
        self.params = {str(k): float(v) for k, v in self.params.items()}
        for g in self.gates:
            if max(g.qubits) >= self.n_qubits or min(g.qubits) < 0:
                raise DimensionError(f"{g.kind}{g.qubits} outside {self.n_qubits} qubits")
            if g.is_parametric and g.angle not in self.params:
                raise ParameterError(f"gate references undeclared parameter {g.angle!r}")

    @property
    def param_names(self) -> list[str]:
        return list(self.params)

    @property
    def n_params(self) -> int:
        return len(self.params)

    def bind(self, values: Mapping[str, float] | Sequence[float]) -> "ParamCircuit":
        """Copy with new parameter values (mapping, or sequence in table order)."""
        params = dict(self.params)
        if isinstance(values, Mapping):
            for k, v in values.items():
                if k not in params:
                    raise ParameterError(f"unknown parameter {k!r}")
                params[k] = float(v)
        else:
            values = list(values)
            if len(values) != len(params):
                raise DimensionError(f"{len(values)} values for {len(params)} parameters")
            params = dict(zip(params, map(float, values)))
        return ParamCircuit(self.n_qubits, self.gates, params, dict(self.meta))

    def prefixed(self, gates: Iterable[Gate]) -> "ParamCircuit":
        return ParamCircuit(self.n_qubits, list(gates) + self.gates, self.params, dict(self.meta))

    def gate_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for g in self.gates:
            out[g.kind] = out.get(g.kind, 0) + 1
        return out

    def to_text(self) -> str:
        lines = [f"# n_qubits={self.n_qubits}"]
        lines += [f"PARAM {k} {v!r}" for k, v in self.params.items()]
        lines += [g.to_text() for g in self.gates]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ParamCircuit":
        n = None
        params: dict[str, float] = {}
        gates = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                m = re.match(r"#\s*n_qubits\s*=\s*(\d+)", line)
                if m:
                    n = int(m.group(1))
                continue
            parts = line.split()
            try:
                if parts[0] == "PARAM" and len(parts) == 3:
                    params[parts[1]] = float(parts[2])
                elif parts[0] == "GATE" and len(parts) >= 3:
                    kind = parts[1]
                    arity = GATE_ARITY.get(kind)
                    if arity is None:
                        raise ValueError(f"unknown gate kind {kind!r}")
                    qubits = tuple(int(p) for p in parts[2:2 + arity])
                    rest = parts[2 + arity:]
                    angle = None
                    if rest:
                        if len(rest) != 1:
                            raise ValueError("trailing tokens")
                        angle = rest[0][1:] if rest[0].startswith("$") else float(rest[0])
                        if isinstance(angle, str):
                            params.setdefault(angle, 0.0)
                    gates.append(Gate(kind, qubits, angle))
                else:
                    raise ValueError(f"unrecognised line {line!r}")
            except (ValueError, DomainError) as exc:
                raise ParseError(str(exc), line=lineno) from None
        if n is None:
            n = 1 + max((max(g.qubits) for g in gates), default=-1)
        return cls(n, gates, params)


# ------------------------------------------------------------------ kernels

@functools.lru_cache(maxsize=None)
def _index(n: int) -> np.ndarray:
    return np.arange(1 << n, dtype=np.int64)


@functools.lru_cache(maxsize=None)
def _pair_indices(n: int, a: int, b: int, control: int | None = None):
    idx = _index(n)
    ba = (idx >> a) & 1
    bb = (idx >> b) & 1
    sel = np.ones(idx.shape, dtype=bool) if control is None else ((idx >> control) & 1) == 1
    i01 = idx[sel & (ba == 1) & (bb == 0)]
    return i01, i01 ^ ((1 << a) | (1 << b))


def _perm(n: int, gate: Gate) -> np.ndarray:
    idx = _index(n)
    if gate.kind == "PauliX":
        return idx ^ (1 << gate.qubits[0])
    c, t = gate.qubits
    return idx ^ (((idx >> c) & 1) << t)


def _hadamard(psi: np.ndarray, n: int, q: int) -> None:
    view = psi.reshape(psi.shape[:-1] + (1 << (n - 1 - q), 2, 1 << q))
    a = view[..., 0, :].copy()
    b = view[..., 1, :]
    view[..., 0, :] = (a + b) * _SQRT_HALF
    view[..., 1, :] = (a - b) * _SQRT_HALF


_SQRT_HALF = 1.0 / math.sqrt(2.0)


def _givens(psi: np.ndarray, i01: np.ndarray, i10: np.ndarray, theta: float) -> None:
    c, s = math.cos(theta), math.sin(theta)
    u = psi[..., i01]
    v = psi[..., i10]
    psi[..., i01] = c * u + s * v
    psi[..., i10] = c * v - s * u


def _apply_inplace(psi: np.ndarray, n: int, gate: Gate, params) -> np.ndarray:
    kind = gate.kind
    if kind in ("PauliX", "CNOT"):
        return psi[..., _perm(n, gate)]
    if kind == "Hadamard":
        _hadamard(psi, n, gate.qubits[0])
        return psi
    theta = gate.resolve(params)
    if kind == "Givens":
        i01, i10 = _pair_indices(n, gate.qubits[0], gate.qubits[1])
    else:
        i01, i10 = _pair_indices(n, gate.qubits[1], gate.qubits[2], gate.qubits[0])
    _givens(psi, i01, i10, theta)
    return psi


def apply_gate(state: Statevector, gate: Gate, params: Mapping[str, float] | None = None) -> Statevector:
    """Return a new state with ``gate`` applied."""
    if max(gate.qubits) >= state.n_qubits:
        raise DimensionError(f"{gate.kind}{gate.qubits} outside {state.n_qubits} qubits")
    psi = _apply_inplace(state.amplitudes.copy(), state.n_qubits, gate, params)
    return Statevector(psi, state.n_qubits)


def run_circuit(
    circuit: ParamCircuit,
    initial: Statevector | None = None,
    params: Mapping[str, float] | None = None,
) -> Statevector:
    """Apply the gates in list order (parameters default to the circuit table)."""
    if initial is None:
        initial = Statevector.basis(circuit.n_qubits)
    if initial.n_qubits != circuit.n_qubits:
        raise DimensionError(
            f"{initial.n_qubits}-qubit state for {circuit.n_qubits}-qubit circuit"
        )
    table = dict(circuit.params) if params is None else {**circuit.params, **params}
    psi = initial.amplitudes.copy()
    for g in circuit.gates:
        psi = _apply_inplace(psi, circuit.n_qubits, g, table)
    return Statevector(psi, circuit.n_qubits)


class CompiledCircuit:
    """Batched executor: runs of permutation gates are fused into one gather."""

    def __init__(self, circuit: ParamCircuit):
        n = circuit.n_qubits
        self.n_qubits = n
        self.param_names = circuit.param_names
        self._ops: list[tuple] = []
        pending = None
        for g in circuit.gates:
            if g.kind in ("PauliX", "CNOT"):
                p = _perm(n, g)
                pending = p if pending is None else pending[p]
                continue
            if pending is not None:
                self._ops.append(("perm", pending))
                pending = None
            if g.kind == "Hadamard":
                self._ops.append(("h", g.qubits[0]))
            else:
                if g.kind == "Givens":
                    ij = _pair_indices(n, g.qubits[0], g.qubits[1])
                else:
                    ij = _pair_indices(n, g.qubits[1], g.qubits[2], g.qubits[0])
                self._ops.append(("rot", ij, g))
        if pending is not None:
            self._ops.append(("perm", pending))

    def run(self, psi: np.ndarray, params: Mapping[str, float]) -> np.ndarray:
        """Evolve amplitudes of shape ``(..., 2**n)``; the input is not modified."""
        psi = np.array(psi, dtype=complex)
        for op in self._ops:
            if op[0] == "perm":
                psi = psi[..., op[1]]
            elif op[0] == "h":
                _hadamard(psi, self.n_qubits, op[1])
            else:
                _givens(psi, op[1][0], op[1][1], op[2].resolve(params))
        return psi


# ------------------------------------------------------------- observables

def expectation(state: Statevector, op: PauliSum) -> complex:
    """``<psi|op|psi>`` by term-wise action on the amplitudes."""
    if op.n_qubits != state.n_qubits:
        raise DimensionError(f"{op.n_qubits}-qubit operator on {state.n_qubits}-qubit state")
    return complex(op.expectation(state.amplitudes))


def _ancilla_axes(n: int, ancilla: Sequence[int]) -> tuple[int, ...]:
    return tuple(n - 1 - q for q in ancilla)


def physical_state(amplitudes: np.ndarray, n_qubits: int, ancilla: Sequence[int]) -> np.ndarray:
    """Unnormalised branch sum ``sum_i psi_i`` over ancilla bitstrings ``i``.

    The remaining qubits are renumbered in ascending order.  Leading batch
    axes of ``amplitudes`` are preserved.
    """
    ancilla = sorted(set(ancilla))
    batch = amplitudes.shape[:-1]
    t = amplitudes.reshape(batch + (2,) * n_qubits)
    axes = tuple(len(batch) + a for a in _ancilla_axes(n_qubits, ancilla))
    return t.sum(axis=axes).reshape(batch + (1 << (n_qubits - len(ancilla)),))


def coherent_summation(state: Statevector, ancilla_set: Sequence[int], H: PauliSum) -> float:
    """``<psi| (I+X)^{(x)a} (x) H |psi>`` via Hadamards on the ancillas.

    Branches are unnormalised: the value is ``sum_ij <psi_i|H|psi_j>`` where
    ``psi_i`` is the system slice attached to ancilla bitstring ``i``.  After a
    Hadamard each ``I + X`` becomes ``2|0><0|``, so only the all-zero ancilla
    slice is read out, weighted by ``2**a``.
    """
    ancilla = sorted(set(int(q) for q in ancilla_set))
    n = state.n_qubits
    if H.n_qubits != n:
        raise DimensionError(f"{H.n_qubits}-qubit operator on {n}-qubit state")
    if set(ancilla) & H.support():
        raise LayoutError(f"ancilla qubits {ancilla} overlap the operator support")
    psi = state.amplitudes.copy()
    for q in ancilla:
        _hadamard(psi, n, q)
    t = psi.reshape((2,) * n)
    index = [slice(None)] * n
    for ax in _ancilla_axes(n, ancilla):
        index[ax] = 0
    zero_slice = t[tuple(index)].reshape(-1)
    system = H.remove_qubits(ancilla)
    value = (1 << len(ancilla)) * system.expectation(zero_slice)
    if H.hermitian and abs(value.imag) > 1e-10:
        raise DomainError(f"Hermitian observable returned {value!r}")
    return float(value.real)
