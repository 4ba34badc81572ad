"""YAML run configuration for the command-line pipeline.

Relative paths inside a config file are resolved against the file's
directory.  See README.md for the full schema.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .ansatz import FixedRotation, RegisterLayout, SpinCoupling
from .errors import ConfigError, RMVQEError
from .rmatrix import POLE_GUARD, Channel
from .solver import KIND_ALIASES, OptimiserConfig, canonical_kind

_TOP_KEYS = {
    "integrals", "target_integrals", "spin_orbitals", "zero_continuum_pairs", "layout",
    "spin", "fixed_rotations", "sector", "channels", "target", "grid", "cost",
    "optimiser", "seed", "output",
}


@dataclass(frozen=True)
class AngleRef:
    """A fixed-rotation angle taken from a target-sector solve."""

    sector: str
    state: int = 0


@dataclass(frozen=True)
class RotationSpec:
    qubits: tuple[int, int]
    angle: float | AngleRef
    label: str = ""

    def resolve(self, target_angles: Mapping[str, list[float]] | None) -> FixedRotation:
        angle = self.angle
        if isinstance(angle, AngleRef):
            if target_angles is None or angle.sector not in target_angles:
                raise ConfigError(f"rotation {self.label or self.qubits} needs the target sector {angle.sector!r}")
            angles = target_angles[angle.sector]
            if not 0 <= angle.state < len(angles) or angles[angle.state] is None:
                raise ConfigError(f"target sector {angle.sector!r} has no CI angle for state {angle.state}")
            angle = angles[angle.state]
        return FixedRotation(self.qubits, float(angle), self.label)


@dataclass(frozen=True)
class TargetSector:
    """Layout of one N-electron target solve (no continuum, one flag per trial)."""

    name: str
    layout: RegisterLayout
    fixed_rotations: tuple[RotationSpec, ...] = ()
    Sz: float = 0.0
    S: float | None = None
    irrep: str | None = None


@dataclass(frozen=True)
class Grid:
    start: float
    stop: float
    points: int
    pole_guard: float = POLE_GUARD

    def values(self) -> list[float]:
        if self.points == 1:
            return [self.start]
        step = (self.stop - self.start) / (self.points - 1)
        return [self.start + i * step for i in range(self.points)]


@dataclass(frozen=True)
class RunConfig:
    path: Path | None
    integrals_path: Path
    target_integrals_path: Path | None
    spin_orbitals: tuple[int, ...] | None
    zero_continuum_pairs: bool
    layout: RegisterLayout
    S: float
    M: float
    couplings: tuple[SpinCoupling | None, ...]
    fixed_rotations: tuple[RotationSpec, ...]
    irrep: str | None
    channels: tuple[Channel, ...]
    u_values: dict
    target_sectors: tuple[TargetSector, ...]
    grid: Grid
    cost: str
    optimiser: OptimiserConfig
    seed: int
    output: Path

    def with_overrides(self, *, out=None, seed=None, cost=None, max_evals=None, tol=None) -> "RunConfig":
        """Apply command-line overrides, re-validating the optimiser settings."""
        cfg = self
        try:
            if out is not None:
                cfg = replace(cfg, output=Path(out))
            if seed is not None:
                cfg = replace(cfg, seed=int(seed), optimiser=replace(cfg.optimiser, seed=int(seed)))
            if cost is not None:
                cfg = replace(cfg, cost=canonical_kind(cost))
            if max_evals is not None:
                cfg = replace(cfg, optimiser=replace(cfg.optimiser, max_evaluations=int(max_evals)))
            if tol is not None:
                cfg = replace(cfg, optimiser=replace(cfg.optimiser, energy_tolerance=float(tol)))
        except RMVQEError as exc:
            raise ConfigError(str(exc)) from None
        return cfg


# ------------------------------------------------------------------ parsing

def _require(doc: Mapping, key: str, where: str):
    if key not in doc:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return doc[key]


def _int_list(v, where: str) -> tuple[int, ...]:
    if not isinstance(v, (list, tuple)) or not all(isinstance(q, int) and not isinstance(q, bool) for q in v):
        raise ConfigError(f"{where}: expected a list of integers, got {v!r}")
    return tuple(v)


def _int_map(v, where: str, listy: bool) -> dict:
    if v is None:
        return {}
    if not isinstance(v, Mapping):
        raise ConfigError(f"{where}: expected a mapping, got {v!r}")
    out = {}
    for k, val in v.items():
        try:
            key = int(k)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: key {k!r} is not a qubit index") from None
        out[key] = _int_list(val, f"{where}[{k}]") if listy else _int_list([val], f"{where}[{k}]")[0]
    return out


def _number(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{where}: must be finite")
    return float(v)


def _layout(doc: Mapping, where: str) -> RegisterLayout:
    known = {
        "target_qubits", "continuum_qubits", "eigenstate_qubits", "N", "channel_map",
        "bound_config", "eigenstate_patterns", "trial_seeds", "spin_partners",
    }
    if not isinstance(doc, Mapping):
        raise ConfigError(f"{where}: expected a mapping")
    extra = set(doc) - known
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    try:
        return RegisterLayout(
            _int_list(_require(doc, "target_qubits", where), f"{where}.target_qubits"),
            _int_list(doc.get("continuum_qubits", []), f"{where}.continuum_qubits"),
            _int_list(_require(doc, "eigenstate_qubits", where), f"{where}.eigenstate_qubits"),
            int(_require(doc, "N", where)),
            channel_map=_int_map(doc.get("channel_map"), f"{where}.channel_map", False),
            bound_config=_int_map(doc.get("bound_config"), f"{where}.bound_config", True),
            eigenstate_patterns=_int_map(doc.get("eigenstate_patterns"), f"{where}.eigenstate_patterns", True),
            trial_seeds=_int_list(_require(doc, "trial_seeds", where), f"{where}.trial_seeds"),
            spin_partners=_int_map(doc.get("spin_partners"), f"{where}.spin_partners", False),
        )
    except RMVQEError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _rotations(items, where: str) -> tuple[RotationSpec, ...]:
    out = []
    for n, item in enumerate(items or []):
        w = f"{where}[{n}]"
        if not isinstance(item, Mapping):
            raise ConfigError(f"{w}: expected a mapping")
        qubits = _int_list(_require(item, "qubits", w), f"{w}.qubits")
        if len(qubits) != 2 or qubits[0] == qubits[1]:
            raise ConfigError(f"{w}: a rotation acts on two distinct qubits")
        raw = _require(item, "angle", w)
        if isinstance(raw, Mapping):
            angle = AngleRef(str(_require(raw, "target", f"{w}.angle")), int(raw.get("state", 0)))
        else:
            angle = _number(raw, f"{w}.angle")
        out.append(RotationSpec(qubits, angle, str(item.get("label", ""))))
    return tuple(out)


def _optimiser(doc: Mapping | None, seed: int) -> OptimiserConfig:
    doc = dict(doc or {})
    allowed = {
        "initial_trust_radius", "final_trust_radius", "max_evaluations", "energy_tolerance",
        "folded_update", "max_outer_steps", "stall_window", "stall_ratio", "polish_step", "polish_restarts",
    }
    extra = set(doc) - allowed
    if extra:
        raise ConfigError(f"optimiser: unknown keys {sorted(extra)}")
    try:
        return OptimiserConfig(seed=seed, **doc)
    except (RMVQEError, TypeError) as exc:
        raise ConfigError(f"optimiser: {exc}") from None


def parse_config(doc: Mapping[str, Any], base: Path | None = None) -> RunConfig:
    """Validate a parsed YAML document and build a :class:`RunConfig`."""
    if not isinstance(doc, Mapping):
        raise ConfigError("config must be a mapping at the top level")
    extra = set(doc) - _TOP_KEYS
    if extra:
        raise ConfigError(f"unknown top-level keys {sorted(extra)}")
    base = base or Path.cwd()

    def path(v, where):
        if not isinstance(v, str) or not v:
            raise ConfigError(f"{where}: expected a file path")
        p = Path(v)
        return p if p.is_absolute() else base / p

    integrals = path(_require(doc, "integrals", "config"), "integrals")
    target_integrals = path(doc["target_integrals"], "target_integrals") if doc.get("target_integrals") else None
    keep = doc.get("spin_orbitals")
    keep = None if keep is None else _int_list(keep, "spin_orbitals")
    layout = _layout(_require(doc, "layout", "config"), "layout")

    spin = _require(doc, "spin", "config")
    if not isinstance(spin, Mapping):
        raise ConfigError("spin: expected a mapping")
    S = _number(_require(spin, "S", "spin"), "spin.S")
    M = _number(_require(spin, "M", "spin"), "spin.M")
    target_spins = spin.get("target_spins", [None] * layout.k)
    if not isinstance(target_spins, list) or len(target_spins) != layout.k:
        raise ConfigError(f"spin.target_spins: need one entry per trial ({layout.k})")
    couplings = []
    for i, st in enumerate(target_spins):
        if st is None:
            couplings.append(None)
            continue
        try:
            couplings.append(SpinCoupling(S, M, _number(st, f"spin.target_spins[{i}]")))
        except RMVQEError as exc:
            raise ConfigError(f"spin.target_spins[{i}]: {exc}") from None

    rotations = _rotations(doc.get("fixed_rotations"), "fixed_rotations")
    for r in rotations:
        if not set(r.qubits) <= set(layout.eigenstate_qubits):
            raise ConfigError(f"fixed rotation {r.label or r.qubits} must act on eigenstate qubits")
    sector = doc.get("sector") or {}
    irrep = sector.get("irrep") if isinstance(sector, Mapping) else None

    n_spatial_cont = None
    channels, u_values = [], {}
    for i, ch in enumerate(doc.get("channels") or []):
        w = f"channels[{i}]"
        if not isinstance(ch, Mapping):
            raise ConfigError(f"{w}: expected a mapping")
        trial = int(_require(ch, "trial", w))
        if not 0 <= trial < layout.k:
            raise ConfigError(f"{w}: trial {trial} outside 0..{layout.k - 1}")
        orb = int(_require(ch, "continuum_orbital", w))
        channels.append(Channel(trial, orb, str(ch.get("label", ""))))
        if "u" in ch:
            u_values[(i, orb)] = _number(ch["u"], f"{w}.u")
    if len({c.trial for c in channels}) != len(channels):
        raise ConfigError("channels: each trial may open at most one channel")
    del n_spatial_cont

    sectors = []
    names = set()
    for i, sec in enumerate((doc.get("target") or {}).get("sectors", []) or []):
        w = f"target.sectors[{i}]"
        if not isinstance(sec, Mapping):
            raise ConfigError(f"{w}: expected a mapping")
        name = str(_require(sec, "name", w))
        if name in names:
            raise ConfigError(f"{w}: duplicate sector name {name!r}")
        names.add(name)
        electrons = int(_require(sec, "electrons", w))
        bound = _int_map(_require(sec, "bound_config", w), f"{w}.bound_config", True)
        flags = sorted(bound)
        seeds = _int_list(sec.get("trial_seeds", flags), f"{w}.trial_seeds")
        tl = _layout(
            {
                "target_qubits": list(layout.target_qubits), "eigenstate_qubits": flags,
                "N": electrons - 1, "bound_config": bound, "trial_seeds": list(seeds),
            },
            w,
        )
        sectors.append(TargetSector(
            name, tl, _rotations(sec.get("fixed_rotations"), f"{w}.fixed_rotations"),
            float(sec.get("Sz", 0.0)), None if sec.get("S") is None else float(sec["S"]), sec.get("irrep"),
        ))
    for r in rotations:
        if isinstance(r.angle, AngleRef) and r.angle.sector not in names:
            raise ConfigError(f"fixed rotation {r.label or r.qubits} refers to unknown target sector {r.angle.sector!r}")

    g = _require(doc, "grid", "config")
    if not isinstance(g, Mapping):
        raise ConfigError("grid: expected a mapping")
    grid = Grid(
        _number(_require(g, "start", "grid"), "grid.start"),
        _number(_require(g, "stop", "grid"), "grid.stop"),
        int(_require(g, "points", "grid")),
        _number(g.get("pole_guard", POLE_GUARD), "grid.pole_guard"),
    )
    if not grid.start < grid.stop:
        raise ConfigError("grid: start must be below stop")
    if grid.points < 1 or grid.pole_guard < 0:
        raise ConfigError("grid: need at least one point and a non-negative pole guard")

    cost = _require(doc, "cost", "config")
    if not isinstance(cost, str) or cost not in KIND_ALIASES:
        raise ConfigError(f"cost: exactly one of {sorted(KIND_ALIASES)} required, got {cost!r}")
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed: expected an integer")
    out = doc.get("output", "out")
    return RunConfig(
        path=None, integrals_path=integrals, target_integrals_path=target_integrals,
        spin_orbitals=keep, zero_continuum_pairs=bool(doc.get("zero_continuum_pairs", False)),
        layout=layout, S=S, M=M, couplings=tuple(couplings), fixed_rotations=rotations,
        irrep=irrep, channels=tuple(channels), u_values=u_values, target_sectors=tuple(sectors),
        grid=grid, cost=canonical_kind(cost), optimiser=_optimiser(doc.get("optimiser"), seed),
        seed=seed, output=path(out, "output"),
    )


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a YAML run config."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    cfg = parse_config(doc, path.resolve().parent)
    return replace(cfg, path=path)
