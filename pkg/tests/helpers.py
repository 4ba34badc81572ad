"""Cached fixture setups shared by several test modules."""

import functools

import numpy as np

from rmvqe import pipeline as pl
from rmvqe.fixtures import h2_config, random_problem


@functools.lru_cache(maxsize=None)
def h2_setup():
    cfg = h2_config()
    targets = pl.solve_target(cfg)
    prob = pl.scattering_problem(cfg)
    vp = pl.variational_problem(cfg, pl.target_angles(targets), prob)
    oracle = pl.oracle_for(vp, cfg, prob)
    return cfg, targets, prob, vp, oracle


@functools.lru_cache(maxsize=None)
def h2_solution(kind):
    cfg, _, _, vp, _ = h2_setup()
    return pl.solve_scattering(cfg, None, kind, vp=vp)


@functools.lru_cache(maxsize=None)
def random_setup(seed):
    """Random fixture on the H2 layout; CI angles from its own target solve."""
    cfg = h2_config()
    full = random_problem(seed)
    targets = pl.solve_target(cfg, "subspace", full.target_block())
    prob = full.restrict(cfg.spin_orbitals)
    vp = pl.variational_problem(cfg, pl.target_angles(targets), prob)
    oracle = pl.oracle_for(vp, cfg, prob)
    return cfg, prob, vp, oracle


def random_state(rng, n):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)


@functools.lru_cache(maxsize=None)
def random_solution(seed, kind):
    cfg, _, vp, _ = random_setup(seed)
    return pl.solve_scattering(cfg, None, kind, vp=vp)


# one "PASS/FAIL criterion N: ..." line per acceptance criterion
ACCEPTANCE: list[str] = []


def report(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok
