"""Command-line driver: target solve, scattering solve, R-matrix and oracle.

Every subcommand takes the same flags.  Outputs go to ``--out`` (default:
the config's ``output`` entry) and are byte-identical for identical inputs.
Failures print a JSON error document on stderr, also saved as
``error.json`` in the output directory when it can be created.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import pipeline as pl
from .config import RunConfig, load_config
from .errors import ConfigError, ConvergenceError, InputError, RMVQEError
from .rmatrix import ScatteringSolution, write_grid_csv
from .solver import canonical_kind, measurement_budget

COSTS = ("variance", "folded", "sum-variance", "subspace")
_SHORT = {canonical_kind(c): c for c in COSTS}


def _g(x: float) -> float:
    return float(f"{x:.12g}")


def _dump(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


# ------------------------------------------------------------------ targets

def _write_target(cfg: RunConfig, out: Path) -> dict:
    kind = canonical_kind(cfg.cost)
    prob = pl.target_problem(cfg)
    results = {}
    for sector in cfg.target_sectors:
        try:
            res = pl.solve_target_sector(prob, sector, kind, cfg.optimiser)
        except ConvergenceError as exc:
            if exc.trace is not None:
                exc.trace.write_csv(out / f"target_trace_{sector.name}.csv")
            raise
        res.trace.write_csv(out / f"target_trace_{sector.name}.csv")
        results[sector.name] = res
    doc = {"cost": _SHORT[kind], "sectors": {n: r.to_dict() for n, r in results.items()}}
    _dump(out / "target.json", doc)
    return pl.target_angles(results)


def _target_angles(cfg: RunConfig, out: Path) -> dict:
    """CI angles from ``target.json`` when present, otherwise from a fresh target solve."""
    path = out / "target.json"
    if not path.exists():
        return _write_target(cfg, out) if cfg.target_sectors else {}
    try:
        doc = json.loads(path.read_text())
        return {name: s["ci_angles"] for name, s in doc["sectors"].items()}
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"malformed target document {path}: {exc}") from None


# --------------------------------------------------------------- subcommands

def cmd_validate_config(cfg: RunConfig) -> dict:
    prob = pl.scattering_problem(cfg)
    pl._check_register(prob, cfg.layout, "scattering layout")
    if cfg.target_sectors:
        tprob = pl.target_problem(cfg)
        for sector in cfg.target_sectors:
            pl._check_register(tprob, sector.layout, f"target sector {sector.name}")
    return {
        "status": "ok",
        "n_qubits": cfg.layout.n_qubits,
        "k": cfg.layout.k,
        "target_sectors": [s.name for s in cfg.target_sectors],
        "cost": _SHORT[canonical_kind(cfg.cost)],
    }


def cmd_solve_target(cfg: RunConfig) -> dict:
    if not cfg.target_sectors:
        raise ConfigError("no target sectors configured")
    out = _out_dir(cfg)
    _write_target(cfg, out)
    return json.loads((out / "target.json").read_text())


def cmd_solve_scattering(cfg: RunConfig) -> dict:
    out = _out_dir(cfg)
    name = _SHORT[canonical_kind(cfg.cost)]
    vp = pl.variational_problem(cfg, _target_angles(cfg, out))
    try:
        sol = pl.solve_scattering(cfg, None, cfg.cost, vp=vp)
    except ConvergenceError as exc:
        if exc.trace is not None:
            exc.trace.write_csv(out / f"trace_{name}.csv")
        raise
    sol.trace.write_csv(out / f"trace_{name}.csv")
    (out / f"solution_{name}.json").write_text(sol.to_json() + "\n")
    summary = {
        "cost": name,
        "energies": [_g(e) for e in sol.energies],
        "evaluations": int(sol.evaluations),
        "measurement_budget": measurement_budget(vp.cost_spec(cfg.cost)),
        "n_qubits": vp.runner.circuit.n_qubits,
        "n_params": len(vp.param_names),
        "seed": cfg.seed,
        "warnings": list(sol.warnings),
    }
    _dump(out / f"summary_{name}.json", summary)
    return summary


def cmd_rmatrix(cfg: RunConfig) -> dict:
    out = _out_dir(cfg)
    name = _SHORT[canonical_kind(cfg.cost)]
    path = out / f"solution_{name}.json"
    if not path.exists():
        raise InputError(f"no solution at {path}; run solve-scattering --cost {name} first")
    sol = ScatteringSolution.from_json(path.read_text())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        grid, values, skipped = pl.rmatrix_on_grid(sol, cfg)
    for msg in skipped:
        print(f"warning: skipping grid point: {msg}", file=sys.stderr)
    write_grid_csv(out / f"rmatrix_{name}.csv", grid, values)
    poles = {
        "poles": [_g(e) for e in sol.energies],
        "pole_guard": cfg.grid.pole_guard,
        "skipped": skipped,
        "points_written": len(grid),
    }
    _dump(out / f"poles_{name}.json", poles)
    return poles


def cmd_oracle_spectrum(cfg: RunConfig) -> dict:
    out = _out_dir(cfg)
    prob = pl.scattering_problem(cfg)
    vp = pl.variational_problem(cfg, _target_angles(cfg, out), prob)
    oracle = pl.oracle_for(vp, cfg, prob)
    sol = pl.oracle_solution(vp, cfg, oracle)
    doc = {
        "energies": [_g(e) for e in oracle.energies],
        "sector_dimension": len(oracle.basis),
        "leakage_H": _g(oracle.leakage),
        "leakage_PHP": _g(oracle.php_leakage),
        "trial_rotation": [[_g(v) for v in row] for row in sol.rotation],
    }
    if sol.boundary is not None:
        doc["boundary"] = [[_g(v) for v in row] for row in np.atleast_2d(sol.boundary)]
    _dump(out / "oracle.json", doc)
    return doc


COMMANDS = {
    "solve-target": cmd_solve_target,
    "solve-scattering": cmd_solve_scattering,
    "rmatrix": cmd_rmatrix,
    "oracle-spectrum": cmd_oracle_spectrum,
    "validate-config": cmd_validate_config,
}


# ---------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML run config")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--seed", type=int)
    common.add_argument("--cost", choices=COSTS)
    common.add_argument("--max-evals", type=int, dest="max_evals")
    common.add_argument("--tol", type=float, help="energy tolerance in Ha")
    parser = argparse.ArgumentParser(prog="rmvqe", description="Variational R-matrix scattering pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _fail(exc: RMVQEError, out: Path | None) -> int:
    doc = exc.to_dict()
    doc["exit_code"] = exc.exit_code
    text = json.dumps(doc, sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return exc.exit_code


def main(argv: list[str] | None = None) -> int:
    """Run one subcommand and return its exit code.

    Exit codes: 0 success, 2 config error, 3 convergence error, 4 input error,
    1 for anything else.
    """
    args = build_parser().parse_args(argv)
    out = Path(args.out) if args.out else None
    try:
        cfg = load_config(args.config).with_overrides(
            out=args.out, seed=args.seed, cost=args.cost, max_evals=args.max_evals, tol=args.tol
        )
        out = Path(cfg.output)
        result = COMMANDS[args.command](cfg)
    except RMVQEError as exc:
        return _fail(exc, out)
    except Exception as exc:  # anything unforeseen still gets an error document
        wrapped = RMVQEError(f"{type(exc).__name__}: {exc}")
        return _fail(wrapped, out)
    print(json.dumps(result, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
