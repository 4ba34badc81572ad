import copy

import pytest
import yaml

from rmvqe.config import load_config, parse_config
from rmvqe.errors import ConfigError, InputError
from rmvqe.fixtures import data_path, h2_config

BASE = yaml.safe_load(data_path("h2.yaml").read_text())


def parsed(**changes):
    doc = copy.deepcopy(BASE)
    for key, value in changes.items():
        if value is None:
            doc.pop(key)
        else:
            doc[key] = value
    return parse_config(doc, data_path("h2.yaml").parent)


def test_fixture_config():
    cfg = h2_config()
    assert cfg.layout.k == 5 and cfg.layout.N == 2
    assert cfg.M == 0.5 and cfg.cost == "subspace_expectation"
    assert cfg.couplings[3].zeta == 0.0 and cfg.couplings[0] is None
    assert len(cfg.grid.values()) == 100
    assert cfg.u_values[(0, 3)] == pytest.approx(-0.0395473)
    assert [s.name for s in cfg.target_sectors] == ["ag_singlet", "b1u_open"]


@pytest.mark.parametrize("changes", [
    {"cost": "newton"},
    {"cost": None},
    {"grid": {"start": 1.0, "stop": -1.0, "points": 10}},
    {"seed": "zero"},
    {"bogus": 1},
    {"layout": {**BASE["layout"], "continuum_qubits": [3, 4, 5]}},
    {"spin": {"S": 0.5, "M": 1.5, "target_spins": [None, None, None, 0, 1]}},
    {"spin": {"S": 0.5, "M": 0.5, "target_spins": [None, 0]}},
    {"channels": [{"trial": 9, "continuum_orbital": 3}]},
    {"fixed_rotations": [{"qubits": [0, 1], "angle": 0.1}]},
    {"fixed_rotations": [{"qubits": [8, 9], "angle": {"target": "missing", "state": 0}}]},
    {"optimiser": {"initial_trust_radius": 1e-9}},
])
def test_config_errors(changes):
    with pytest.raises(ConfigError):
        parsed(**changes)


def test_overrides():
    cfg = h2_config().with_overrides(out="elsewhere", seed=7, cost="sum-variance", max_evals=10, tol=1e-6)
    assert str(cfg.output) == "elsewhere"
    assert cfg.seed == cfg.optimiser.seed == 7
    assert cfg.cost == "sum_of_variances"
    assert cfg.optimiser.max_evaluations == 10
    assert cfg.optimiser.energy_tolerance == 1e-6
    with pytest.raises(ConfigError):
        h2_config().with_overrides(tol=-1.0)
    with pytest.raises(ConfigError):
        h2_config().with_overrides(cost="bfgs")


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("layout: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    assert not isinstance(ConfigError("x"), InputError)
