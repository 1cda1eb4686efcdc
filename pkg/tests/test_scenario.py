import copy
import json
from pathlib import Path

import numpy as np
import pytest

from simulator import SimulationConfig
from utils.errors import ScenarioError
from utils.scenario import load_scenario, parse_scenario

BASE = {
    "graph": {"node_count": 3, "edges": [[1, 2], [2, 3]]},
    "payoffs": [
        {"type": "quadratic", "a": 0.0, "c": 1.0},
        {"type": "quadratic", "a": 5.0, "c": 1.0},
        {"type": "quadratic", "a": 0.0, "c": 1.0},
    ],
    "dynamics": "nbrd",
    "x0": [0.0, 1.0, 0.0],
    "integrator": {"h": 0.05, "t_max": 20.0},
}

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def _with(**changes):
    data = copy.deepcopy(BASE)
    for key, value in changes.items():
        if value is None:
            data.pop(key, None)
        else:
            data[key] = value
    return data


def test_parses_a_complete_scenario():
    scenario = parse_scenario(BASE, defaults=SimulationConfig(), name="demo")
    assert scenario.topology.node_count == 3
    assert scenario.dynamics == "nbrd"
    assert scenario.config.h == 0.05
    assert scenario.config.t_max == 20.0
    assert scenario.config.tol_eq == 1e-8
    assert scenario.trajectory_path == Path("out/demo_trajectory.csv")
    assert scenario.summary_path == Path("out/demo_summary.json")
    assert scenario.seed == 0


def test_initial_state_is_renormalized():
    scenario = parse_scenario(
        _with(x0=[0.5, 0.5 + 5e-10, 0.0]), defaults=SimulationConfig()
    )
    assert float(np.sum(scenario.x0)) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize(
    "data, message",
    [
        ([1, 2, 3], "top level"),
        (_with(extra=1), "unknown keys"),
        (_with(graph=None), "graph: missing"),
        (_with(graph={"node_count": 3}), "graph.edges: missing"),
        (_with(graph={"node_count": 3, "edges": [[1, 1], [2, 3]]}), "self loop"),
        (_with(graph={"node_count": 3, "edges": [[1, 2]]}), "disconnected"),
        (_with(payoffs=BASE["payoffs"][:2]), "payoffs: has 2 entries"),
        (
            _with(payoffs=[*BASE["payoffs"][:2], {"type": "log", "w": -1.0, "s": 1.0}]),
            "payoffs[2]",
        ),
        (_with(x0=[0.5, 0.4, 0.0]), "x0: sums to"),
        (_with(x0=[1.0, 0.0]), "x0: has 2 entries"),
        (_with(x0=[1.5, -0.5, 0.0]), "nonnegative"),
        (_with(x0=None), "x0: missing"),
        (_with(integrator={"h": 0.05, "order": 4}), "integrator: unknown keys"),
        (_with(integrator={"h": -0.05}), "integrator: h"),
        (_with(dynamics="replicator"), "unsupported kind"),
        (_with(seed=-4), "seed"),
    ],
)
def test_errors_name_the_offending_field(data, message):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(data, defaults=SimulationConfig())
    assert message.lower() in str(info.value).lower()


def test_load_reports_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ScenarioError, match="not valid JSON"):
        load_scenario(path)


def test_load_names_outputs_after_the_file(tmp_path):
    path = tmp_path / "my_case.json"
    path.write_text(json.dumps(BASE), encoding="utf-8")
    scenario = load_scenario(path, defaults=SimulationConfig())
    assert scenario.name == "my_case"
    assert scenario.trajectory_path.name == "my_case_trajectory.csv"


@pytest.mark.parametrize("path", sorted(SCENARIO_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_scenarios_load(path):
    scenario = load_scenario(path, defaults=SimulationConfig())
    assert scenario.profile.node_count == scenario.topology.node_count
