"""Channel coefficients, boundary amplitudes and the R-matrix."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import InputError, PoleError, UnsupportedLayoutError

POLE_GUARD = 1e-9


@dataclass(frozen=True)
class Channel:
    """An open channel: a trial state carrying exactly one continuum orbital."""

    trial: int
    continuum_orbital: int  # spatial index of the continuum orbital
    label: str = ""


@dataclass
class ScatteringSolution:
    """Result of a scattering-sector solve.

    ``rotation[i, k]`` is the component of eigenstate ``k`` on trial ``i``;
    columns follow ``energies`` (ascending).
    """

    energies: np.ndarray
    rotation: np.ndarray
    channels: list[Channel] = field(default_factory=list)
    channel_coeffs: dict | None = None
    boundary: np.ndarray | None = None
    params: dict = field(default_factory=dict)
    kind: str = ""
    evaluations: int = 0
    warnings: list[str] = field(default_factory=list)
    layout_ref: object = None

    def __post_init__(self):
        self.energies = np.asarray(self.energies, dtype=float)
        self.rotation = np.asarray(self.rotation, dtype=float)
        k = len(self.energies)
        if self.rotation.shape != (k, k):
            raise InputError(f"rotation of shape {self.rotation.shape} for {k} energies")
        if np.abs(self.rotation.T @ self.rotation - np.eye(k)).max() > 1e-10:
            raise InputError("rotation matrix is not orthogonal")

    def to_json(self) -> str:
        doc = {
            "kind": self.kind,
            "energies": [float(f"{e:.12g}") for e in self.energies],
            "rotation": self.rotation.tolist(),
            "params": {k: float(v) for k, v in self.params.items()},
            "evaluations": int(self.evaluations),
            "channels": [
                {"trial": c.trial, "continuum_orbital": c.continuum_orbital, "label": c.label}
                for c in self.channels
            ],
            "warnings": list(self.warnings),
        }
        if self.channel_coeffs is not None:
            doc["channel_coeffs"] = [
                {"channel": i, "continuum_orbital": j, "a": list(map(float, v))}
                for (i, j), v in sorted(self.channel_coeffs.items())
            ]
        if self.boundary is not None:
            doc["boundary"] = np.asarray(self.boundary).tolist()
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ScatteringSolution":
        try:
            doc = json.loads(text)
            channels = [Channel(c["trial"], c["continuum_orbital"], c.get("label", "")) for c in doc.get("channels", [])]
            sol = cls(
                np.array(doc["energies"]), np.array(doc["rotation"]), channels,
                params=doc.get("params", {}), kind=doc.get("kind", ""),
                evaluations=doc.get("evaluations", 0), warnings=doc.get("warnings", []),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise InputError(f"malformed solution document: {exc}") from None
        if "boundary" in doc:
            sol.boundary = np.array(doc["boundary"], dtype=float)
        return sol


def extract_channel_coeffs(rotation: np.ndarray, channels: Sequence[Channel]) -> dict[tuple[int, int], np.ndarray]:
    """``a[(i, j(i))][k] = U[trial(i), k]`` for each open channel ``i``.

    Trials that carry no continuum orbital are simply not listed as channels.
    """
    seen = set()
    out = {}
    for i, ch in enumerate(channels):
        if ch.trial in seen:
            raise UnsupportedLayoutError(f"trial {ch.trial} couples to more than one continuum orbital")
        seen.add(ch.trial)
        out[(i, ch.continuum_orbital)] = np.array(rotation[ch.trial, :], dtype=float)
    return out


def boundary_amplitudes(coeffs: Mapping[tuple[int, int], np.ndarray], u_values: Mapping[tuple[int, int], float]) -> np.ndarray:
    """``w[i, k] = sum_j a[(i, j)][k] * u[(i, j)]``; one row per channel."""
    if not coeffs:
        return np.zeros((0, 0))
    n_channels = 1 + max(i for i, _ in coeffs)
    n_states = len(next(iter(coeffs.values())))
    w = np.zeros((n_channels, n_states))
    for (i, j), a in coeffs.items():
        if (i, j) not in u_values:
            if np.any(np.asarray(a) != 0):
                raise InputError(f"no boundary amplitude u for channel {i}, continuum orbital {j}")
            continue
        w[i] += np.asarray(a) * float(u_values[(i, j)])
    return w


def r_matrix(w: np.ndarray, energies: Sequence[float], E: float, pole_guard: float = POLE_GUARD) -> np.ndarray:
    """``R_ij(E) = 1/2 sum_k w_ik w_jk / (E_k - E)``."""
    energies = np.asarray(energies, dtype=float)
    gap = energies - E
    near = np.abs(gap) < pole_guard
    if near.any():
        k = int(np.argmax(near))
        raise PoleError(float(E), float(energies[k]), pole_guard)
    return 0.5 * (w / gap) @ w.T


def r_matrix_grid(
    w: np.ndarray, energies: Sequence[float], grid: Sequence[float], pole_guard: float = POLE_GUARD
) -> tuple[list[float], list[np.ndarray], list[str]]:
    """Evaluate on a grid, skipping (and reporting) points inside a pole guard."""
    kept, values, skipped = [], [], []
    for E in grid:
        try:
            values.append(r_matrix(w, energies, E, pole_guard))
            kept.append(float(E))
        except PoleError as exc:
            skipped.append(str(exc))
            warnings.warn(f"skipping grid point: {exc}", stacklevel=2)
    return kept, values, skipped


def write_grid_csv(path: str | Path, energies: Sequence[float], values: Sequence[np.ndarray]) -> None:
    m = values[0].shape[0] if values else 0
    header = ["E"] + [f"R_{i}{j}" for i in range(m) for j in range(m)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for E, R in zip(energies, values):
            writer.writerow([f"{E:.12g}"] + [f"{v:.12g}" for v in R.ravel()])


def fix_signs(rotation: np.ndarray) -> np.ndarray:
    """Per-column sign gauge: largest-magnitude entry positive."""
    out = np.array(rotation, dtype=float)
    for k in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, k])))
        if out[i, k] < 0:
            out[:, k] *= -1
    return out
