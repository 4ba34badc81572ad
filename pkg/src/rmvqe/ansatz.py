"""Register-structured (N+1)-electron ansatz built from Givens rotations.

The eigenstate register is one-hot: each of its qubits ("flags") stands for
one configuration of the system register.  A trial state is seeded by a
single X on its flag.  The circuit then applies

1. the SO(k) Givens cascade on the trial flags (variational),
2. fixed spin-coupling rotations between a flag and its spin partner,
3. any further fixed rotations (static CI mixing, spin recoupling),
4. CNOT fans copying each flag onto its target-orbital pattern and, for
   open flags, onto its continuum qubit.

Every branch of the resulting state is ``|flag> (x) |configuration>``, so the
system register always holds exactly ``N + 1`` electrons with at most one in
the continuum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError, LayoutError, ParameterError
from .simulator import CompiledCircuit, Gate, ParamCircuit

_HALF = 0.5


def _is_half_integer(v: float) -> bool:
    return abs(2 * v - round(2 * v)) < 1e-12


@dataclass(frozen=True)
class SpinCoupling:
    """Coupling of a target spin ``S_t`` and one electron to total ``(S, M)``."""

    S: float
    M: float
    S_t: float
    zeta: float | None = None

    def __post_init__(self):
        if self.zeta is None:
            object.__setattr__(self, "zeta", clebsch_gordan_angle(self.S, self.M, self.S_t))
        elif not 0 <= self.zeta < math.pi:
            raise DomainError(f"zeta {self.zeta} outside [0, pi)")


def clebsch_gordan_angle(S: float, M: float, S_t: float) -> float:
    """Half-angle fixing the two-term spin coupling.

    The coupled state is ``cos(zeta) |S_t, M-1/2>|up> + sin(zeta) |S_t, M+1/2>|down>``.

    Args:
        S: Total spin.
        M: Total spin projection.
        S_t: Target spin, either ``S - 1/2`` or ``S + 1/2``.

    Returns:
        zeta in ``[0, pi/2]`` for ``S_t = S - 1/2`` and in ``[pi/2, pi)`` otherwise.
    """
    for name, v in (("S", S), ("M", M), ("S_t", S_t)):
        if not _is_half_integer(v):
            raise DomainError(f"{name}={v} is not a multiple of 1/2")
    if S < 0 or S_t < 0:
        raise DomainError("spins must be non-negative")
    if abs(M) > S + 1e-12:
        raise DomainError(f"|M|={abs(M)} exceeds S={S}")
    if not _is_half_integer(S - M) or abs((S - M) - round(S - M)) > 1e-12:
        raise DomainError(f"S - M = {S - M} is not an integer")
    if abs(S_t - (S - _HALF)) < 1e-12:
        if S <= 0:
            raise DomainError("S_t = S - 1/2 requires S > 0")
        return 0.5 * math.acos(min(1.0, max(-1.0, M / S)))
    if abs(S_t - (S + _HALF)) < 1e-12:
        return 0.5 * math.pi + 0.5 * math.acos(min(1.0, max(-1.0, M / (S + 1))))
    raise DomainError(f"S_t={S_t} must be S - 1/2 or S + 1/2 for S={S}")


@dataclass(frozen=True)
class CascadeSpec:
    k: int
    pair_order: tuple[tuple[int, int], ...]
    param_names: tuple[str, ...]

    def __post_init__(self):
        expected = self.k * (self.k - 1) // 2
        if len(self.pair_order) != expected:
            raise DomainError(f"{len(self.pair_order)} pairs for k={self.k}, expected {expected}")
        if len({frozenset(p) for p in self.pair_order}) != expected:
            raise DomainError("cascade repeats a pair")
        if len(self.param_names) != expected or len(set(self.param_names)) != expected:
            raise DomainError("cascade needs one unique name per pair")

    def block(self, r: int) -> list[str]:
        """Parameter names of round ``r``: the pairs ``(r, j)`` with ``j > r``."""
        return [n for (i, _), n in zip(self.pair_order, self.param_names) if i == r]


def build_cascade(k: int) -> CascadeSpec:
    """Pairs ``(k-2,k-1)``, then ``(k-3,k-2),(k-3,k-1)``, ... down to ``(0,1..k-1)``."""
    if k < 2:
        raise DomainError(f"cascade needs k >= 2, got {k}")
    pairs = [(i, j) for i in range(k - 2, -1, -1) for j in range(i + 1, k)]
    names = tuple(f"theta_{i}_{j}" for i, j in pairs)
    return CascadeSpec(k, tuple(pairs), names)


def givens_matrix(k: int, i: int, j: int, theta: float) -> np.ndarray:
    g = np.eye(k)
    c, s = math.cos(theta), math.sin(theta)
    g[i, i] = g[j, j] = c
    g[i, j] = s
    g[j, i] = -s
    return g


def extract_rotation_matrix(cascade: CascadeSpec, params: Mapping[str, float] | Sequence[float]) -> np.ndarray:
    """The k x k orthogonal matrix realised by the cascade on one-hot flags.

    Column ``i`` holds the components of the rotated trial ``i`` on the
    unrotated trials.
    """
    if not isinstance(params, Mapping):
        params = dict(zip(cascade.param_names, params))
    u = np.eye(cascade.k)
    for (i, j), name in zip(cascade.pair_order, cascade.param_names):
        u = givens_matrix(cascade.k, i, j, float(params[name])) @ u
    return u


@dataclass(frozen=True)
class FixedRotation:
    """Givens gate with a fixed angle on two eigenstate flags."""

    qubits: tuple[int, int]
    angle: float
    label: str = ""


@dataclass(frozen=True)
class RegisterLayout:
    """Index bookkeeping for the target, continuum and eigenstate registers.

    Attributes:
        target_qubits: Target spin-orbital qubits.
        continuum_qubits: Continuum spin-orbital qubits.
        eigenstate_qubits: One-hot flags.
        N: Target electron count.
        channel_map: Open flag -> continuum qubit it fills.
        bound_config: Bound flag -> the ``N + 1`` target qubits it occupies.
        eigenstate_patterns: Open flag -> the ``N`` target qubits it occupies.
        trial_seeds: Flag seeded by each trial state, in trial order.
        spin_partners: Seed flag -> flag holding its flipped-spin branch.
    """

    target_qubits: tuple[int, ...]
    continuum_qubits: tuple[int, ...]
    eigenstate_qubits: tuple[int, ...]
    N: int
    channel_map: Mapping[int, int] = field(default_factory=dict)
    bound_config: Mapping[int, tuple[int, ...]] = field(default_factory=dict)
    eigenstate_patterns: Mapping[int, tuple[int, ...]] = field(default_factory=dict)
    trial_seeds: tuple[int, ...] = ()
    spin_partners: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        conv = lambda m: {int(k): v for k, v in m.items()}
        object.__setattr__(self, "target_qubits", tuple(self.target_qubits))
        object.__setattr__(self, "continuum_qubits", tuple(self.continuum_qubits))
        object.__setattr__(self, "eigenstate_qubits", tuple(self.eigenstate_qubits))
        object.__setattr__(self, "channel_map", {k: int(v) for k, v in conv(self.channel_map).items()})
        object.__setattr__(self, "bound_config", {k: tuple(v) for k, v in conv(self.bound_config).items()})
        object.__setattr__(
            self, "eigenstate_patterns", {k: tuple(v) for k, v in conv(self.eigenstate_patterns).items()}
        )
        object.__setattr__(self, "trial_seeds", tuple(self.trial_seeds))
        object.__setattr__(self, "spin_partners", {k: int(v) for k, v in conv(self.spin_partners).items()})
        self.validate()

    @property
    def n_qubits(self) -> int:
        return len(self.target_qubits) + len(self.continuum_qubits) + len(self.eigenstate_qubits)

    @property
    def system_qubits(self) -> tuple[int, ...]:
        return tuple(sorted(self.target_qubits + self.continuum_qubits))

    @property
    def k(self) -> int:
        return len(self.trial_seeds)

    def validate(self) -> None:
        t, c, a = map(set, (self.target_qubits, self.continuum_qubits, self.eigenstate_qubits))
        sizes = len(self.target_qubits) + len(self.continuum_qubits) + len(self.eigenstate_qubits)
        if len(t | c | a) != sizes:
            raise LayoutError("target, continuum and eigenstate registers must be disjoint")
        if t | c | a != set(range(sizes)):
            raise LayoutError(f"registers must cover qubits 0..{sizes - 1}")
        if self.N < 0:
            raise LayoutError("negative electron count")
        for flag in a:
            bound = flag in self.bound_config
            open_ = flag in self.channel_map
            if bound == open_:
                raise LayoutError(f"flag {flag} must be either bound or coupled to a continuum qubit")
            if open_ and flag not in self.eigenstate_patterns:
                raise LayoutError(f"open flag {flag} has no target pattern")
        for flag, pattern in self.bound_config.items():
            if flag not in a:
                raise LayoutError(f"bound_config key {flag} is not an eigenstate qubit")
            if len(set(pattern)) != self.N + 1 or not set(pattern) <= t:
                raise LayoutError(f"bound flag {flag} must occupy {self.N + 1} distinct target qubits")
        for flag, pattern in self.eigenstate_patterns.items():
            if flag not in a:
                raise LayoutError(f"pattern key {flag} is not an eigenstate qubit")
            if len(set(pattern)) != self.N or not set(pattern) <= t:
                raise LayoutError(f"open flag {flag} must occupy {self.N} distinct target qubits")
        for flag, q in self.channel_map.items():
            if q not in c:
                raise LayoutError(f"flag {flag} maps to {q}, which is not a continuum qubit")
        if len(set(self.trial_seeds)) != len(self.trial_seeds) or not set(self.trial_seeds) <= a:
            raise LayoutError("trial seeds must be distinct eigenstate qubits")
        for seed, partner in self.spin_partners.items():
            if partner not in a or partner in self.trial_seeds:
                raise LayoutError(f"spin partner {partner} of {seed} must be an unseeded flag")

    def flag_configuration(self, flag: int) -> tuple[int, ...]:
        """System qubits occupied in the branch carrying ``flag``."""
        if flag in self.bound_config:
            return tuple(sorted(self.bound_config[flag]))
        return tuple(sorted(self.eigenstate_patterns[flag] + (self.channel_map[flag],)))


def build_ansatz(
    layout: RegisterLayout,
    cascade: CascadeSpec,
    couplings: Sequence[SpinCoupling | None] = (),
    fixed_rotations: Sequence[FixedRotation] = (),
    slot_order: Sequence[int] | None = None,
) -> ParamCircuit:
    """Assemble the ansatz circuit with all cascade angles at zero.

    Args:
        layout: Register layout; its ``trial_seeds`` define the trial basis.
        cascade: Givens cascade over ``k`` slots.
        couplings: Per-trial spin coupling (``None`` or zero angle: no gate).
        fixed_rotations: Further fixed Givens gates, applied after the
            spin-coupling gates in the given order.
        slot_order: Trial index sitting in each cascade slot (default: identity).

    Returns:
        Circuit whose ``meta`` records the trial seeds and slot order.
    """
    k = cascade.k
    if k > len(layout.trial_seeds):
        raise LayoutError(f"cascade of size {k} but only {len(layout.trial_seeds)} trial seeds")
    slot_order = list(range(k)) if slot_order is None else [int(s) for s in slot_order]
    if sorted(slot_order) != list(range(k)):
        raise LayoutError(f"slot order {slot_order} is not a permutation of 0..{k - 1}")
    couplings = list(couplings) + [None] * (len(layout.trial_seeds) - len(couplings))
    flags = [layout.trial_seeds[slot_order[s]] for s in range(k)]

    gates: list[Gate] = []
    for (i, j), name in zip(cascade.pair_order, cascade.param_names):
        gates.append(Gate("Givens", (flags[i], flags[j]), name))
    for trial, coupling in enumerate(couplings):
        if coupling is None or coupling.zeta == 0.0:
            continue
        seed = layout.trial_seeds[trial]
        if seed not in layout.spin_partners:
            raise LayoutError(f"trial {trial} needs a spin partner flag for zeta={coupling.zeta}")
        # seed branch keeps cos(zeta), partner branch receives sin(zeta)
        gates.append(Gate("Givens", (layout.spin_partners[seed], seed), float(coupling.zeta)))
    for rot in fixed_rotations:
        if not set(rot.qubits) <= set(layout.eigenstate_qubits):
            raise LayoutError(f"fixed rotation {rot.label or rot.qubits} must act on eigenstate flags")
        gates.append(Gate("Givens", tuple(rot.qubits), float(rot.angle)))
    for flag in layout.eigenstate_qubits:
        if flag in layout.bound_config:
            targets = layout.bound_config[flag]
        else:
            if flag not in layout.channel_map:
                raise LayoutError(f"flag {flag} has no continuum coupling")
            targets = layout.eigenstate_patterns[flag] + (layout.channel_map[flag],)
        gates.extend(Gate("CNOT", (flag, q)) for q in targets)

    params = {name: 0.0 for name in cascade.param_names}
    meta = {
        "trial_seeds": list(layout.trial_seeds[:len(layout.trial_seeds)]),
        "slot_order": slot_order,
        "k": k,
    }
    return ParamCircuit(layout.n_qubits, gates, params, meta)


def prepare_trial(circuit: ParamCircuit, trial_index: int) -> ParamCircuit:
    """Prefix the circuit with the X gate seeding trial ``trial_index``."""
    seeds = circuit.meta.get("trial_seeds")
    if seeds is None:
        raise LayoutError("circuit carries no trial seeds")
    if not 0 <= trial_index < len(seeds):
        raise DomainError(f"trial index {trial_index} outside 0..{len(seeds) - 1}")
    return circuit.prefixed([Gate("PauliX", (seeds[trial_index],))])


class AnsatzRunner:
    """Batched preparation of trial states for the optimisers.

    Starting from the seed's basis state is the same as prefixing the seed X
    gate.  The ansatz only rotates eigenstate flags before the CNOT fans, and
    the system qubits are still in |0> at that point, so the rotations are
    simulated on the flag register alone.  The fans then send flag bitstring
    ``f`` to the system configuration given by the XOR of the patterns of the
    set flags, which is a fixed scatter.

    When every flag rotation is a (controlled) Givens gate the flag state
    never leaves the single-occupancy subspace, and only ``a`` amplitudes are
    tracked instead of ``2**a``.  :meth:`full_states` rebuilds the complete
    register for cross-checks against :func:`run_circuit`.
    """

    def __init__(self, circuit: ParamCircuit, layout: RegisterLayout):
        self.circuit = circuit
        self.layout = layout
        self.param_names = circuit.param_names
        self.n_qubits = circuit.n_qubits
        self.slot_order = list(circuit.meta["slot_order"])
        self.seeds = list(circuit.meta["trial_seeds"])
        flags = list(layout.eigenstate_qubits)
        system = list(layout.system_qubits)
        local = {q: i for i, q in enumerate(flags)}
        rotations, fan = [], []
        for g in circuit.gates:
            if g.kind == "CNOT" and g.qubits[0] in local and g.qubits[1] not in local:
                fan.append(g)
            elif fan or not set(g.qubits) <= set(flags):
                raise LayoutError("ansatz must rotate flags before the CNOT fans")
            else:
                rotations.append(Gate(g.kind, tuple(local[q] for q in g.qubits), g.angle))
        n_flag = len(flags)
        self.n_flags = n_flag
        self.n_system = len(system)
        self.flag_circuit = ParamCircuit(n_flag, rotations, circuit.params)
        self.onehot = all(g.kind in ("Givens", "ControlledGivens") for g in rotations)
        self.compiled = None if self.onehot else CompiledCircuit(self.flag_circuit)
        if self.onehot:
            self._compile_onehot(rotations, n_flag)

        masks = [0] * n_flag
        for g in fan:
            masks[local[g.qubits[0]]] ^= 1 << g.qubits[1]
        sys_pos = {q: i for i, q in enumerate(system)}

        def to_system(occ):
            return sum(1 << sys_pos[q] for q in system if (occ >> q) & 1)

        if self.onehot:
            states = [1 << i for i in range(n_flag)]
        else:
            states = list(range(1 << n_flag))
        self._flag_basis = states
        self._full_index = np.zeros(len(states), dtype=np.int64)
        self._sys_index = np.zeros(len(states), dtype=np.int64)
        for row, f in enumerate(states):
            occ = full = 0
            for i in range(n_flag):
                if (f >> i) & 1:
                    occ ^= masks[i]
                    full |= 1 << flags[i]
            self._full_index[row] = full | occ
            self._sys_index[row] = to_system(occ)
        self._scatter = np.zeros((len(states), 1 << self.n_system))
        self._scatter[np.arange(len(states)), self._sys_index] = 1.0
        self._local_seed = [local[s] for s in self.seeds]
        self._pulled: dict[int, tuple[object, np.ndarray]] = {}

    def _compile_onehot(self, rotations: list[Gate], n_flag: int) -> None:
        # one-hot Givens act as plain rotations; controlled ones are idle there
        ops = [g for g in rotations if g.kind == "Givens"]
        last = max((i for i, g in enumerate(ops) if g.is_parametric), default=-1)
        self._var_names = sorted({g.angle for g in ops[:last + 1] if g.is_parametric})
        slot = {n: i for i, n in enumerate(self._var_names)}
        fixed: list[float] = []
        self._var_ops = []
        for g in ops[:last + 1]:
            if g.is_parametric:
                k = slot[g.angle]
            else:
                k = len(self._var_names) + len(fixed)
                fixed.append(float(g.angle))
            self._var_ops.append((g.qubits[0], g.qubits[1], k))
        self._var_fixed = fixed
        # the fixed tail is the same for every call: one matrix on the right
        tail = np.eye(n_flag)
        for g in ops[last + 1:]:
            a, b = g.qubits
            c, s = math.cos(g.angle), math.sin(g.angle)
            u = tail[:, a].copy()
            tail[:, a] = c * u + s * tail[:, b]
            tail[:, b] = c * tail[:, b] - s * u
        self._tail = None if np.array_equal(tail, np.eye(n_flag)) else tail

    def flag_states(self, params: Mapping[str, float], trials: Sequence[int]) -> np.ndarray:
        """Flag-register amplitudes in the runner's flag basis, one row per trial."""
        trials = list(trials)
        if self.onehot:
            try:
                theta = np.array([params[n] for n in self._var_names] + self._var_fixed, dtype=float)
            except KeyError as exc:
                raise ParameterError(f"unresolved parameter {exc.args[0]!r}") from None
            cos, sin = np.cos(theta).tolist(), np.sin(theta).tolist()
            # columns as float lists: numpy call overhead dominates at this size
            cols = [[0.0] * len(trials) for _ in range(self.n_flags)]
            for row, t in enumerate(trials):
                cols[self._local_seed[t]][row] = 1.0
            for a, b, k in self._var_ops:
                c, s = cos[k], sin[k]
                u, v = cols[a], cols[b]
                cols[a] = [c * x + s * y for x, y in zip(u, v)]
                cols[b] = [c * y - s * x for x, y in zip(u, v)]
            amps = np.array(cols).T
            return amps if self._tail is None else amps @ self._tail
        out = np.zeros((len(trials), 1 << self.n_flags), dtype=complex)
        for row, t in enumerate(trials):
            out[row, 1 << self._local_seed[t]] = 1.0
        return self.compiled.run(out, params)

    def full_states(self, params: Mapping[str, float], trials: Sequence[int]) -> np.ndarray:
        """Full-register amplitudes, one row per trial index."""
        amps = self.flag_states(params, trials)
        out = np.zeros((len(amps), 1 << self.n_qubits), dtype=complex)
        out[:, self._full_index] = amps
        return out

    def physical(self, params: Mapping[str, float], trials: Sequence[int]) -> np.ndarray:
        """Branch-summed system amplitudes (the coherent summation over flags)."""
        return self.flag_states(params, trials) @ self._scatter

    def slot_states(self, params: Mapping[str, float], slots: Sequence[int]) -> np.ndarray:
        return self.physical(params, [self.slot_order[s] for s in slots])

    def pulled_back(self, op) -> np.ndarray:
        """Matrix of a system operator between the fanned-out flag basis states.

        Built from the operator's own action on each configuration, so
        ``amps^dagger M amps`` equals ``<phi|op|phi>`` for the branch sum ``phi``.
        """
        key = id(op)
        hit = self._pulled.get(key)
        if hit is None or hit[0] is not op:
            cols = op.apply(self._scatter)  # rows: op|config_f>
            m = cols @ self._scatter.T
            m = m.T
            if not np.any(np.abs(m.imag) > 0):
                m = m.real.copy()
            hit = (op, m)
            self._pulled[key] = hit
        return hit[1]

    def expect(self, op, amps: np.ndarray) -> np.ndarray:
        """``<phi|op|phi>`` per row of flag amplitudes."""
        m = self.pulled_back(op)
        if np.isrealobj(amps) and np.isrealobj(m):
            return ((amps @ m) * amps).sum(axis=1)
        return np.real(np.sum(amps.conj() * (amps @ m.T), axis=-1))

    def expect_many(self, ops: Sequence, amps: np.ndarray) -> np.ndarray:
        """Expectations of several operators, shape ``(len(ops), rows)``."""
        ms = [self.pulled_back(op) for op in ops]
        if np.isrealobj(amps) and all(np.isrealobj(m) for m in ms):
            d = amps.shape[1]
            both = (amps @ np.hstack(ms)).reshape(len(amps), len(ms), d)
            return np.einsum("rkd,rd->kr", both, amps)
        return np.array([self.expect(op, amps) for op in ops])


def trial_basis(runner: AnsatzRunner) -> np.ndarray:
    """Zero-parameter physical trial states, rows in trial order."""
    zero = {n: 0.0 for n in runner.param_names}
    return runner.physical(zero, range(len(runner.seeds)))
