"""Target solve, scattering solve, oracle reference and R-matrix for a run config."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ansatz import trial_basis
from .config import RunConfig, TargetSector
from .errors import InputError, LayoutError
from .fermion import FermionProblem, parse_fcidump, qubit_hamiltonian, s_squared_operator
from .oracle import IrrepFilter, SectorBasis, dense_hamiltonian, enumerate_sector, exact_spectrum, spin_adapted_spectrum
from .pauli import PauliSum
from .rmatrix import ScatteringSolution, boundary_amplitudes, extract_channel_coeffs, fix_signs, r_matrix_grid
from .solver import VariationalProblem, canonical_kind, solve


def ci_angle(column: np.ndarray) -> float:
    """Givens angle that turns the first of two flags into ``(c0, c1)``.

    A Givens gate seeded on its first flag leaves ``cos(a)`` there and
    ``-sin(a)`` on the second, so ``a = atan2(-c1, c0)``.
    """
    c0, c1 = column
    return math.atan2(-c1, c0)


@dataclass
class TargetResult:
    name: str
    energies: np.ndarray
    rotation: np.ndarray
    evaluations: int
    ci_angles: list = field(default_factory=list)
    trace: object = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "energies": [float(f"{e:.12g}") for e in self.energies],
            "coefficients": [[float(f"{v:.12g}") for v in col] for col in self.rotation.T],
            "ci_angles": [None if a is None else float(f"{a:.12g}") for a in self.ci_angles],
            "evaluations": int(self.evaluations),
        }


# ------------------------------------------------------------------- inputs

def scattering_problem(cfg: RunConfig) -> FermionProblem:
    prob = parse_fcidump(cfg.integrals_path)
    if cfg.spin_orbitals is not None:
        if max(cfg.spin_orbitals) >= prob.n_spin_orbitals:
            raise LayoutError("spin_orbitals refers to orbitals beyond the integral file")
        prob = prob.restrict(cfg.spin_orbitals)
    return prob


def target_problem(cfg: RunConfig) -> FermionProblem:
    if cfg.target_integrals_path is not None:
        return parse_fcidump(cfg.target_integrals_path)
    return parse_fcidump(cfg.integrals_path).target_block()


def _check_register(prob: FermionProblem, cfg_layout, what: str) -> None:
    n_sys = len(cfg_layout.system_qubits)
    if prob.n_spin_orbitals != n_sys:
        raise LayoutError(f"{what}: integrals give {prob.n_spin_orbitals} spin-orbitals, layout has {n_sys} system qubits")


# ------------------------------------------------------------- target solve

def solve_target_sector(prob: FermionProblem, sector: TargetSector, kind: str, optimiser) -> TargetResult:
    _check_register(prob, sector.layout, f"target sector {sector.name}")
    H = qubit_hamiltonian(prob)
    rotations = [r.resolve(None) for r in sector.fixed_rotations]
    vp = VariationalProblem(sector.layout, H, (), rotations)
    sol = solve(vp, optimiser, kind)
    u = fix_signs(sol.rotation)
    angles = [ci_angle(u[:, s]) for s in range(vp.k)] if vp.k == 2 else [None] * vp.k
    return TargetResult(sector.name, sol.energies, u, sol.evaluations, angles, sol.trace)


def solve_target(cfg: RunConfig, kind: str | None = None, prob: FermionProblem | None = None) -> dict[str, TargetResult]:
    """Solve every configured target sector (no continuum, so no projection)."""
    prob = prob if prob is not None else target_problem(cfg)
    kind = canonical_kind(kind or cfg.cost)
    return {s.name: solve_target_sector(prob, s, kind, cfg.optimiser) for s in cfg.target_sectors}


def target_oracle(prob: FermionProblem, sector: TargetSector) -> np.ndarray:
    H = qubit_hamiltonian(prob)
    irrep = IrrepFilter(sector.irrep) if sector.irrep else None
    basis = enumerate_sector(sector.layout, sector.layout.N, sector.Sz, irrep, prob.orbitals)
    h = dense_hamiltonian(H, basis)
    if sector.S is None:
        return exact_spectrum(h)[0]
    s2 = dense_hamiltonian(s_squared_operator(prob.orbitals, H.n_qubits), basis)
    return spin_adapted_spectrum(h, s2, sector.S)[0]


# --------------------------------------------------------- scattering solve

def target_angles(results: dict[str, TargetResult]) -> dict[str, list]:
    return {name: r.ci_angles for name, r in results.items()}


def variational_problem(cfg: RunConfig, angles: dict | None, prob: FermionProblem | None = None):
    prob = prob if prob is not None else scattering_problem(cfg)
    _check_register(prob, cfg.layout, "scattering layout")
    H = qubit_hamiltonian(prob, cfg.zero_continuum_pairs)
    rotations = [r.resolve(angles) for r in cfg.fixed_rotations]
    return VariationalProblem(cfg.layout, H, cfg.couplings, rotations)


def attach_channels(sol: ScatteringSolution, cfg: RunConfig) -> ScatteringSolution:
    """Fill channel coefficients and, when u values are configured, boundary amplitudes."""
    sol.channels = list(cfg.channels)
    if sol.channels:
        sol.channel_coeffs = extract_channel_coeffs(sol.rotation, sol.channels)
        if cfg.u_values:
            sol.boundary = boundary_amplitudes(sol.channel_coeffs, cfg.u_values)
    return sol


def solve_scattering(cfg: RunConfig, angles: dict | None, kind: str | None = None, vp=None) -> ScatteringSolution:
    vp = vp if vp is not None else variational_problem(cfg, angles)
    sol = solve(vp, cfg.optimiser, kind or cfg.cost)
    sol.rotation = fix_signs(sol.rotation)
    return attach_channels(sol, cfg)


# ------------------------------------------------------------------- oracle

@dataclass
class OracleResult:
    energies: np.ndarray
    vectors: np.ndarray  # columns over ``basis``
    basis: SectorBasis
    leakage: float
    php_leakage: float


def oracle_sector(cfg: RunConfig, H: PauliSum, prob: FermionProblem, P: PauliSum | None = None) -> OracleResult:
    """Exact projected-sector spectrum: doublets (or the configured S) at the configured M."""
    irrep = IrrepFilter(cfg.irrep) if cfg.irrep else None
    basis = enumerate_sector(cfg.layout, cfg.layout.N, cfg.M, irrep, prob.orbitals)
    if len(basis) == 0:
        raise InputError("the configured sector is empty")
    h, leak = dense_hamiltonian(H, basis, return_leakage=True)
    php_leak = float("nan")
    if P is not None:
        _, php_leak = dense_hamiltonian((P @ H @ P).simplify(), basis, return_leakage=True)
    s2 = dense_hamiltonian(s_squared_operator(prob.orbitals, H.n_qubits), basis)
    e, v = spin_adapted_spectrum(h, s2, cfg.S)
    return OracleResult(e, v, basis, leak, php_leak)


def oracle_for(vp: VariationalProblem, cfg: RunConfig, prob: FermionProblem) -> OracleResult:
    return oracle_sector(cfg, vp.H, prob, vp.P)


def oracle_trial_rotation(vp: VariationalProblem, oracle: OracleResult) -> np.ndarray:
    """Oracle eigenvectors expressed in the ansatz trial basis, sign-fixed.

    Raises:
        InputError: If the trial states do not span the oracle eigenvectors.
    """
    trials = oracle.basis.embed(trial_basis(vp.runner))  # rows: trials over sector determinants
    u = np.real(trials.conj() @ oracle.vectors)
    if np.abs(u.T @ u - np.eye(u.shape[1])).max() > 1e-8:
        raise InputError("trial basis does not span the oracle eigenvectors")
    return fix_signs(u)


def oracle_solution(vp: VariationalProblem, cfg: RunConfig, oracle: OracleResult) -> ScatteringSolution:
    sol = ScatteringSolution(oracle.energies, oracle_trial_rotation(vp, oracle), kind="oracle")
    return attach_channels(sol, cfg)


# ----------------------------------------------------------------- R-matrix

def rmatrix_on_grid(sol: ScatteringSolution, cfg: RunConfig):
    if sol.boundary is None:
        if not cfg.u_values:
            raise InputError("no boundary amplitudes u configured")
        attach_channels(sol, cfg)
    return r_matrix_grid(sol.boundary, sol.energies, cfg.grid.values(), cfg.grid.pole_guard)
