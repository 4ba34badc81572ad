"""Cost functions, the derivative-free optimiser and the solve strategies.

All strategies act on the same ansatz.  The cascade is split into rounds:
round ``r`` owns the angles ``theta_{r, r+1..k-1}`` and fixes the state grown
from cascade slot ``r``.  Lower rounds' angles are frozen once optimised and
higher rounds' angles stay at zero, so the state of round ``r`` is orthogonal
to every earlier one by construction.

Energies are measured on the branch-summed system state (the coherent
summation over the eigenstate flags).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .ansatz import (
    AnsatzRunner,
    CascadeSpec,
    FixedRotation,
    RegisterLayout,
    SpinCoupling,
    build_ansatz,
    build_cascade,
    extract_rotation_matrix,
)
from .errors import ConvergenceError, DomainError, LayoutError
from .pauli import PauliSum, count_distinct_terms, union_term_count
from .projection import conjugate_by_projector, inner_region_projector
from .rmatrix import ScatteringSolution

log = logging.getLogger(__name__)

# variance-type runs must end below ACCEPT_FACTOR * energy_tolerance**2
ACCEPT_FACTOR = 100.0

KINDS = ("variance", "folded", "sum_of_variances", "subspace_expectation")
KIND_ALIASES = {
    "variance": "variance",
    "folded": "folded",
    "sum-variance": "sum_of_variances",
    "sum_of_variances": "sum_of_variances",
    "subspace": "subspace_expectation",
    "subspace_expectation": "subspace_expectation",
}


def canonical_kind(kind: str) -> str:
    try:
        return KIND_ALIASES[kind]
    except KeyError:
        raise DomainError(f"unknown cost kind {kind!r}; choose from {sorted(KIND_ALIASES)}") from None


@dataclass
class OptimiserConfig:
    """Trust-region settings for the derivative-free optimiser.

    ``folded_update`` chooses when the folded cost refreshes its reference
    energy: ``"outer"`` (once per outer step) or ``"evaluation"`` (at every
    cost call).  ``stall_window`` (default ``20 * (n + 1)``) and the
    ``polish_*`` settings control the simplex fallback used when a
    variance-type cost stalls above ``energy_tolerance**2``.
    """

    initial_trust_radius: float = 0.5
    final_trust_radius: float = 1e-8
    max_evaluations: int = 300000
    energy_tolerance: float = 1e-7
    seed: int = 0
    folded_update: str = "outer"
    max_outer_steps: int = 50
    stall_window: int | None = None
    stall_ratio: float = 0.9
    polish_step: float = 1e-3
    polish_restarts: int = 5

    def __post_init__(self):
        if not 0 < self.final_trust_radius < self.initial_trust_radius:
            raise DomainError("need 0 < final_trust_radius < initial_trust_radius")
        if self.energy_tolerance <= 0:
            raise DomainError("energy tolerance must be positive")
        if self.max_evaluations < 1:
            raise DomainError("max_evaluations must be positive")
        if not 0 < self.stall_ratio <= 1:
            raise DomainError("stall_ratio must lie in (0, 1]")
        if self.polish_step <= 0 or self.polish_restarts < 0:
            raise DomainError("polish step must be positive and restarts non-negative")
        if self.folded_update not in ("outer", "evaluation"):
            raise DomainError(f"folded_update must be 'outer' or 'evaluation', got {self.folded_update!r}")


@dataclass
class CostSpec:
    kind: str
    H: PauliSum
    HPH: PauliSum | None = None
    trial_indices: tuple[int, ...] = (0,)

    def __post_init__(self):
        self.kind = canonical_kind(self.kind)
        needs = self.kind != "subspace_expectation"
        if needs and self.HPH is None:
            raise DomainError(f"{self.kind} cost needs HPH")
        if not needs and self.HPH is not None:
            raise DomainError("subspace cost takes H only")
        if not self.trial_indices:
            raise DomainError("no trial states selected")


def measurement_budget(spec: CostSpec) -> int:
    """Distinct Pauli words the cost kind has to measure."""
    if spec.kind == "subspace_expectation":
        return count_distinct_terms(spec.H)
    return union_term_count(spec.H, spec.HPH)


@dataclass
class ConvergenceTrace:
    """One record per cost evaluation."""

    param_names: list[str]
    k: int
    records: list[tuple[int, float, np.ndarray, np.ndarray]] = field(default_factory=list)

    def add(self, cost: float, params: np.ndarray, energies: np.ndarray) -> None:
        self.records.append((len(self.records), float(cost), np.array(params, float), np.array(energies, float)))

    def __len__(self):
        return len(self.records)

    def header(self) -> list[str]:
        return (
            ["eval", "cost"]
            + [f"param_{i}" for i in range(len(self.param_names))]
            + [f"E_{i}" for i in range(self.k)]
        )

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            for i, cost, p, e in self.records:
                w.writerow([i, f"{cost:.12g}"] + [f"{v:.12g}" for v in p] + [f"{v:.12g}" for v in e])


# ------------------------------------------------------------ cost functions

def _expect(op: PauliSum, state: np.ndarray) -> np.ndarray:
    return np.real(op.expectation(state))


def cost_variance(state: np.ndarray, H: PauliSum, HPH: PauliSum) -> float:
    """``<HPH> - <H>^2`` on a state fixed by the projector."""
    e = _expect(H, state)
    return float(_expect(HPH, state) - e * e)


def cost_folded(state: np.ndarray, H: PauliSum, HPH: PauliSum, E_tilde: float) -> float:
    """``<HPH> - 2 E~ <H> + E~^2``."""
    return float(_expect(HPH, state) - 2.0 * E_tilde * _expect(H, state) + E_tilde ** 2)


def cost_sum_of_variances(states: np.ndarray, H: PauliSum, HPH: PauliSum) -> float:
    """Sum of per-state variances; ``states`` has one row per trial."""
    e = _expect(H, states)
    return float(np.sum(_expect(HPH, states) - e * e))


# ----------------------------------------------------------------- problem

class VariationalProblem:
    """Ansatz plus operators for one symmetry sector.

    Args:
        layout: Register layout; system qubits must be ``0..n_sys-1``.
        H: Qubit Hamiltonian on the system register.
        couplings: Per-trial spin couplings.
        fixed_rotations: Static Givens gates on eigenstate flags.
        order_by_energy: Place trials in cascade slots by ascending
            zero-parameter energy (ties by trial index).
    """

    def __init__(
        self,
        layout: RegisterLayout,
        H: PauliSum,
        couplings: Sequence[SpinCoupling | None] = (),
        fixed_rotations: Sequence[FixedRotation] = (),
        order_by_energy: bool = True,
    ):
        n_sys = len(layout.system_qubits)
        if layout.system_qubits != tuple(range(n_sys)):
            raise LayoutError("system qubits must occupy the lowest register indices")
        if H.n_qubits != n_sys:
            raise LayoutError(f"Hamiltonian acts on {H.n_qubits} qubits, system register has {n_sys}")
        self.layout = layout
        self.H = H
        self.k = layout.k
        if self.k < 1:
            raise LayoutError("layout has no trial states")
        # a single trial has nothing to rotate
        self.cascade: CascadeSpec = build_cascade(self.k) if self.k > 1 else CascadeSpec(1, (), ())
        self.couplings = list(couplings)
        self.fixed_rotations = list(fixed_rotations)
        self.P = inner_region_projector(layout.target_qubits, layout.continuum_qubits, layout.N, n_sys)
        self._HPH = None
        identity = build_ansatz(layout, self.cascade, self.couplings, self.fixed_rotations)
        zero = {n: 0.0 for n in self.cascade.param_names}
        self.zero_energies = _expect(H, AnsatzRunner(identity, layout).physical(zero, range(self.k)))
        if order_by_energy:
            slot_order = sorted(range(self.k), key=lambda i: (round(self.zero_energies[i], 12), i))
        else:
            slot_order = list(range(self.k))
        self.circuit = build_ansatz(layout, self.cascade, self.couplings, self.fixed_rotations, slot_order)
        self.runner = AnsatzRunner(self.circuit, layout)
        self.slot_order = slot_order

    @property
    def HPH(self) -> PauliSum:
        if self._HPH is None:
            self._HPH = conjugate_by_projector(self.H, self.P)
        return self._HPH

    @property
    def param_names(self) -> list[str]:
        return list(self.cascade.param_names)

    def cost_spec(self, kind: str) -> CostSpec:
        kind = canonical_kind(kind)
        hph = None if kind == "subspace_expectation" else self.HPH
        return CostSpec(kind, self.H, hph, tuple(range(self.k)))

    def states(self, params: dict, slots: Sequence[int]) -> np.ndarray:
        return self.runner.slot_states(params, slots)

    def moments(self, params: dict, slots: Sequence[int], with_hph: bool = True):
        """``(<H>, <HPH>)`` per cascade slot; ``<HPH>`` is None if not requested."""
        amps = self.runner.flag_states(params, [self.slot_order[s] for s in slots])
        if not with_hph:
            return self.runner.expect(self.H, amps), None
        e, hph = self.runner.expect_many((self.H, self.HPH), amps)
        return e, hph

    def trial_energies(self, params: dict) -> np.ndarray:
        """Energies of all slot states in slot order at ``params``."""
        return self.moments(params, range(self.k), with_hph=False)[0]

    def rotation(self, params: dict) -> np.ndarray:
        """Trial-basis matrix: column ``s`` is the state of cascade slot ``s``."""
        u_slot = extract_rotation_matrix(self.cascade, params)
        u = np.zeros_like(u_slot)
        u[self.slot_order, :] = u_slot
        return u


# --------------------------------------------------------------- optimiser

class _Guard:
    """Wraps a cost: tracks the best point and decides when to stop.

    A run stops when the cost reaches ``target``, when the evaluation budget
    is spent, or (zero-floor costs only) when the last ``window`` evaluations
    improved the best cost by less than ``target`` or by less than a
    fraction ``1 - stall_ratio`` of itself.
    """

    def __init__(self, fun, config: OptimiserConfig, trace, target, window):
        self.fun, self.config, self.trace = fun, config, trace
        self.target, self.window = target, window
        self.best_x, self.best = None, np.inf
        self.history: list[float] = []
        self.reason: str | None = None

    def __call__(self, x):
        c = self.fun(x)
        if c < self.best:
            self.best, self.best_x = c, np.array(x, float)
        self.history.append(self.best)
        if self.target is not None and c <= self.target:
            self.reason = "target"
        elif len(self.trace) >= self.config.max_evaluations:
            self.reason = "budget"
        elif self.target is not None and self.window and len(self.history) > self.window:
            before = self.history[-1 - self.window]
            if before - self.best < self.target or self.best > self.config.stall_ratio * before:
                self.reason = "stall"
        return c


class _Stop(Exception):
    pass


def _minimise(
    fun: Callable[[np.ndarray], float],
    x0: np.ndarray,
    config: OptimiserConfig,
    trace: ConvergenceTrace,
    what: str,
    target: float | None = None,
) -> np.ndarray:
    """COBYLA until the trust radius falls below its final value.

    With ``target`` set (variance-type costs, whose floor is zero) the run
    also stops once the cost reaches it, or once a full window of
    evaluations barely improves the best cost (see :class:`_Guard`).  If the
    trust-region run ends above the target, a Nelder-Mead simplex polish
    takes over from the best point.
    """
    x0 = np.asarray(x0, float)
    n = len(x0)
    # the trace holds one record per evaluation, so it doubles as the budget
    remaining = config.max_evaluations - len(trace)
    if remaining <= n + 1:
        raise ConvergenceError(f"{what}: evaluation budget exhausted", trace)
    window = config.stall_window if config.stall_window is not None else 20 * (n + 1)
    guard = _Guard(fun, config, trace, target, window)

    # once the guard has fired, the cost is frozen and the trust region
    # collapses without further recorded evaluations
    def frozen(x):
        if guard.reason is not None:
            return guard.best
        return guard(x)

    res = minimize(
        frozen, x0, method="COBYLA",
        options={"rhobeg": config.initial_trust_radius, "tol": config.final_trust_radius,
                 "maxiter": remaining + 100000},
    )
    if guard.reason == "budget" or (guard.reason is None and res.status == 2):
        raise ConvergenceError(
            f"{what}: {config.max_evaluations} evaluations reached before convergence", trace
        )
    if target is None:
        return np.asarray(res.x, float) if guard.best_x is None else guard.best_x
    if guard.reason == "target":
        return guard.best_x

    # simplex fallback for a zero-floor cost that stalled above its target
    def stopping(x):
        c = guard(x)
        if guard.reason in ("target", "budget"):
            raise _Stop
        return c

    x = guard.best_x
    for _ in range(config.polish_restarts):
        start = guard.best
        guard.reason = None
        guard.window = 0
        simplex = np.vstack([x] + [x + config.polish_step * e for e in np.eye(n)])
        try:
            minimize(
                stopping, x, method="Nelder-Mead",
                options={"initial_simplex": simplex, "xatol": 1e-12, "fatol": 0.01 * target,
                         "maxfev": config.max_evaluations, "adaptive": True},
            )
        except _Stop:
            pass
        x = guard.best_x
        if guard.reason == "target":
            break
        if guard.reason == "budget":
            raise ConvergenceError(
                f"{what}: {config.max_evaluations} evaluations reached before convergence", trace
            )
        if start - guard.best < target:
            break  # at the floor this round can reach
    log.debug("%s: simplex polish ended at cost %.3e", what, guard.best)
    return x


@dataclass
class RoundResult:
    params: dict
    energy: float
    cost: float
    evaluations: int


def single_state_optimise(
    vp: VariationalProblem,
    config: OptimiserConfig,
    kind: str,
    trial_index: int,
    params: dict | None = None,
    trace: ConvergenceTrace | None = None,
) -> RoundResult:
    """Optimise the round that owns ``trial_index`` with all other angles fixed.

    Args:
        vp: The sector problem.
        config: Optimiser settings.
        kind: ``"variance"``, ``"folded"`` or ``"subspace_expectation"``.
        trial_index: Trial whose cascade slot defines the round.
        params: Starting angles (zeros by default); angles of lower rounds
            should already be optimised.

    Returns:
        Updated angles, the round's energy and final cost.
    """
    kind = canonical_kind(kind)
    if kind == "sum_of_variances":
        raise DomainError("sum_of_variances optimises all trials together")
    if not 0 <= trial_index < vp.k:
        raise DomainError(f"trial index {trial_index} outside 0..{vp.k - 1}")
    params = {n: 0.0 for n in vp.param_names} if params is None else dict(params)
    trace = trace if trace is not None else ConvergenceTrace(vp.param_names, vp.k)
    slot = vp.slot_order.index(trial_index)
    names = vp.cascade.block(slot)
    tol = config.energy_tolerance
    start = len(trace)

    need_hph = kind != "subspace_expectation"

    def measure(x):
        # one batch over all slots: the trace records every slot energy
        p = dict(params)
        p.update(zip(names, x))
        e, hph = vp.moments(p, range(vp.k), need_hph)
        return p, e, (hph[slot] if need_hph else None)

    def cost_of(e, hph, e_tilde=None):
        if not need_hph:
            return float(e)
        if e_tilde is None:
            return float(hph - e * e)
        return float(hph - 2.0 * e_tilde * e + e_tilde ** 2)

    def objective(e_tilde=None):
        def f(x):
            p, e, hph = measure(x)
            c = cost_of(e[slot], hph, e_tilde)
            trace.add(c, [p[n] for n in vp.param_names], e)
            return c
        return f

    x = np.array([params[n] for n in names])
    if not names:
        objective()(x)
    elif kind == "subspace_expectation":
        x = _minimise(objective(), x, config, trace, f"round {slot} energy")
    elif kind == "variance" or config.folded_update == "evaluation":
        # an eigenstate already: verification only
        if objective()(x) >= tol ** 2:
            x = _minimise(objective(), x, config, trace, f"round {slot} {kind}", target=tol ** 2)
    else:
        e_prev = None
        for step in range(config.max_outer_steps):
            _, e, _ = measure(x)
            e_tilde = float(e[slot])
            f = objective(e_tilde)
            c = f(x)
            if c < tol ** 2:
                break
            # frozen earlier rounds leave a small variance floor, so a
            # reference energy that no longer moves also ends the loop
            if e_prev is not None and abs(e_tilde - e_prev) < 1e-3 * tol and c <= ACCEPT_FACTOR * tol ** 2:
                break
            e_prev = e_tilde
            # the first reference energy is far from any eigenvalue, so the
            # folded floor is not zero yet: plain trust-region run only
            x = _minimise(f, x, config, trace, f"round {slot} folded", target=tol ** 2 if step else None)
        else:
            raise ConvergenceError(f"round {slot} folded: reference energy did not settle", trace)

    p, e, hph = measure(x)
    e = float(e[slot])
    cost = cost_of(e, hph)
    if need_hph and cost > ACCEPT_FACTOR * tol ** 2:
        raise ConvergenceError(
            f"round {slot} {kind}: final variance {cost:.3e} Ha^2 is not an eigenstate", trace
        )
    return RoundResult(p, e, cost, len(trace) - start)


def _finish(vp: VariationalProblem, params: dict, kind: str, trace, warnings=()):
    u = vp.rotation(params)
    # column s of u is the state grown from slot s
    slot_e = vp.trial_energies(params)
    order = np.argsort(slot_e, kind="stable")
    sol = ScatteringSolution(
        slot_e[order], u[:, order], params=dict(params), kind=kind,
        evaluations=len(trace), warnings=list(warnings), layout_ref=vp.layout,
    )
    sol.trace = trace
    return sol


def duplicate_warnings(energies: Sequence[float], tol: float) -> list[str]:
    e = np.sort(np.asarray(energies))
    out = []
    for a, b in zip(e[:-1], e[1:]):
        if abs(b - a) < 10 * tol:
            out.append(f"duplicate eigenvalue {a:.12g} / {b:.12g}: an eigenstate may have been found twice")
    return out


def sequential_optimise(vp: VariationalProblem, config: OptimiserConfig, kind: str) -> ScatteringSolution:
    """Round-by-round solve for the subspace, variance and folded kinds."""
    kind = canonical_kind(kind)
    trace = ConvergenceTrace(vp.param_names, vp.k)
    params = {n: 0.0 for n in vp.param_names}
    for slot in range(vp.k):
        res = single_state_optimise(vp, config, kind, vp.slot_order[slot], params, trace)
        params = res.params
        log.debug("round %d (%s): E = %.12f after %d evaluations", slot, kind, res.energy, res.evaluations)
    sol = _finish(vp, params, kind, trace)
    if kind == "variance":
        sol.warnings.extend(duplicate_warnings(sol.energies, config.energy_tolerance))
    return sol


def subspace_optimise(vp: VariationalProblem, config: OptimiserConfig) -> ScatteringSolution:
    """Sequential subspace optimisation: each round minimises one energy."""
    return sequential_optimise(vp, config, "subspace_expectation")


def sum_of_variances_optimise(vp: VariationalProblem, config: OptimiserConfig) -> ScatteringSolution:
    """Minimise the summed variance of all trials over every cascade angle at once."""
    trace = ConvergenceTrace(vp.param_names, vp.k)
    names = vp.param_names
    tol = config.energy_tolerance

    def value(x):
        e, hph = vp.moments(dict(zip(names, x)), range(vp.k))
        return float(np.sum(hph - e * e)), e

    def f(x):
        c, e = value(x)
        trace.add(c, x, e)
        return c

    x = np.zeros(len(names))
    if f(x) >= tol ** 2 and names:
        x = _minimise(f, x, config, trace, "sum of variances", target=tol ** 2)
    final, _ = value(x)
    if final > ACCEPT_FACTOR * tol ** 2:
        raise ConvergenceError(f"sum of variances stalled at {final:.3e} Ha^2", trace)
    return _finish(vp, dict(zip(names, x)), "sum_of_variances", trace)


def solve(vp: VariationalProblem, config: OptimiserConfig, kind: str) -> ScatteringSolution:
    kind = canonical_kind(kind)
    if kind == "sum_of_variances":
        return sum_of_variances_optimise(vp, config)
    return sequential_optimise(vp, config, kind)
