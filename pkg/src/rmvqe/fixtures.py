"""Packaged H2 fixture and seeded random symmetry-respecting fixtures."""

from __future__ import annotations

import itertools
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .config import RunConfig, load_config
from .fermion import CONTINUUM, TARGET, FermionProblem, build_problem, write_fcidump

H2_REGISTERS = (TARGET, TARGET, CONTINUUM, CONTINUUM)
H2_IRREPS = ("ag", "b1u", "ag", "b1u")


def data_path(name: str) -> Path:
    return Path(str(resources.files("rmvqe") / "data" / name))


def h2_config() -> RunConfig:
    """The committed e- + H2 run config (integral paths resolved in the package)."""
    return load_config(data_path("h2.yaml"))


def _eight_fold(t: np.ndarray) -> np.ndarray:
    perms = [(0, 1, 2, 3), (1, 0, 2, 3), (0, 1, 3, 2), (1, 0, 3, 2),
             (2, 3, 0, 1), (3, 2, 0, 1), (2, 3, 1, 0), (3, 2, 1, 0)]
    return sum(t.transpose(p) for p in perms) / len(perms)


def random_integrals(seed: int, irreps=H2_IRREPS, odd: str = "b1u"):
    """Seeded spatial integrals that respect a two-irrep (g/u) symmetry.

    One-electron terms couple orbitals of equal irrep only; chemist ERIs
    ``(pq|rs)`` survive only with an even number of ``odd`` indices.  The
    orbital energies are spread out so that sectors are well separated.

    Returns:
        ``(h1, eri_chem, h_nuc)``.
    """
    rng = np.random.default_rng(seed)
    n = len(irreps)
    parity = np.array([lab == odd for lab in irreps], dtype=int)
    h1 = rng.normal(scale=0.15, size=(n, n))
    h1 = 0.5 * (h1 + h1.T)
    h1 += np.diag(np.sort(rng.uniform(-1.3, 0.6, size=n)))
    h1 *= parity[:, None] == parity[None, :]
    eri = _eight_fold(rng.normal(scale=0.08, size=(n,) * 4))
    for p, q in itertools.product(range(n), repeat=2):
        # Coulomb-like diagonal keeps the spectrum physical-looking
        eri[p, p, q, q] += 0.3 + 0.2 * rng.random() if p <= q else 0.0
    eri = _eight_fold(eri)
    keep = (parity[:, None, None, None] + parity[None, :, None, None]
            + parity[None, None, :, None] + parity[None, None, None, :]) % 2 == 0
    eri = eri * keep
    return h1, eri, float(rng.uniform(0.5, 1.0))


def random_problem(seed: int) -> FermionProblem:
    """Random fixture with the H2 register structure (2 target + 2 continuum orbitals)."""
    h1, eri, h_nuc = random_integrals(seed)
    return build_problem(h1, eri, h_nuc, H2_REGISTERS, H2_IRREPS, 2)


def write_random_fixture(seed: int, directory: str | Path) -> Path:
    """Write a random FCIDUMP plus a run config reusing the H2 layout.

    Returns:
        Path of the written YAML config.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    h1, eri, h_nuc = random_integrals(seed)
    fcidump = directory / f"random_{seed}.fcidump"
    write_fcidump(fcidump, h1, eri, h_nuc, 2, registers=H2_REGISTERS, irreps=H2_IRREPS)
    doc = yaml.safe_load(data_path("h2.yaml").read_text())
    doc["integrals"] = fcidump.name
    doc.pop("target_integrals", None)
    doc["seed"] = seed
    doc["output"] = f"out_{seed}"
    cfg = directory / f"random_{seed}.yaml"
    cfg.write_text(yaml.safe_dump(doc, sort_keys=False))
    return cfg
