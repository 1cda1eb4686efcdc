import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Union

import numpy as np

from environment import NetworkTopology, PayoffProfile, build_topology
from simulator import SimulationConfig
from utils.errors import ConfigurationError, ScenarioError

SCENARIO_KEYS = {"graph", "payoffs", "dynamics", "x0", "integrator", "output", "seed"}
X0_TOL = 1e-9


@dataclass(frozen=True)
class Scenario:
    topology: NetworkTopology
    profile: PayoffProfile
    x0: np.ndarray
    config: SimulationConfig
    trajectory_path: Path
    summary_path: Path
    seed: int = 0
    name: str = "scenario"

    @property
    def dynamics(self) -> str:
        return self.config.dynamics


def _require(data: Mapping, key: str, where: str) -> Any:
    if key not in data:
        raise ScenarioError(f"{where}{key}: missing")
    return data[key]


def _parse_graph(data: Any) -> NetworkTopology:
    if not isinstance(data, Mapping):
        raise ScenarioError("graph: expected an object")
    node_count = _require(data, "node_count", "graph.")
    edges = _require(data, "edges", "graph.")
    if not isinstance(edges, list) or not all(isinstance(e, list) for e in edges):
        raise ScenarioError("graph.edges: expected a list of 2-element arrays")
    try:
        return build_topology(node_count, [tuple(e) for e in edges])
    except ConfigurationError as e:
        raise ScenarioError(f"graph: {e}") from e


def _parse_x0(data: Any, node_count: int) -> np.ndarray:
    if not isinstance(data, list):
        raise ScenarioError("x0: expected an array of numbers")
    try:
        x0 = np.array([float(v) for v in data], dtype=float)
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"x0: non-numeric entry ({e})") from e
    if x0.size != node_count:
        raise ScenarioError(f"x0: has {x0.size} entries, graph has {node_count} nodes")
    if not np.all(np.isfinite(x0)) or np.min(x0) < 0.0:
        raise ScenarioError("x0: entries must be finite and nonnegative")
    total = float(np.sum(x0))
    if abs(total - 1.0) > X0_TOL:
        raise ScenarioError(f"x0: sums to {total}, expected 1 within {X0_TOL}")
    return x0 / total


def parse_scenario(
    data: Any,
    defaults: Optional[SimulationConfig] = None,
    name: str = "scenario",
) -> Scenario:
    if not isinstance(data, Mapping):
        raise ScenarioError("scenario: expected a JSON object at the top level")
    unknown = sorted(set(data) - SCENARIO_KEYS)
    if unknown:
        raise ScenarioError(f"scenario: unknown keys {unknown}")

    topology = _parse_graph(_require(data, "graph", ""))

    specs = _require(data, "payoffs", "")
    if not isinstance(specs, list):
        raise ScenarioError("payoffs: expected an array with one object per node")
    if len(specs) != topology.node_count:
        raise ScenarioError(
            f"payoffs: has {len(specs)} entries, graph has {topology.node_count} nodes"
        )
    try:
        profile = PayoffProfile.from_specs(specs)
    except ConfigurationError as e:
        raise ScenarioError(str(e)) from e

    x0 = _parse_x0(_require(data, "x0", ""), topology.node_count)

    integrator = data.get("integrator", {})
    if not isinstance(integrator, Mapping):
        raise ScenarioError("integrator: expected an object")
    base = defaults or SimulationConfig.from_env()
    overrides = dict(integrator)
    if "dynamics" in data:
        overrides["dynamics"] = data["dynamics"]
    try:
        config = base.merged(overrides)
    except (ConfigurationError, TypeError) as e:
        raise ScenarioError(f"integrator: {e}") from e

    output = data.get("output", {})
    if not isinstance(output, Mapping):
        raise ScenarioError("output: expected an object")
    trajectory_path = Path(output.get("trajectory", f"out/{name}_trajectory.csv"))
    summary_path = Path(output.get("summary", f"out/{name}_summary.json"))

    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ScenarioError(f"seed: expected a nonnegative integer, got {seed!r}")

    return Scenario(
        topology=topology,
        profile=profile,
        x0=x0,
        config=config,
        trajectory_path=trajectory_path,
        summary_path=summary_path,
        seed=seed,
        name=name,
    )


def load_scenario(
    path: Union[str, Path], defaults: Optional[SimulationConfig] = None
) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: not valid JSON ({e})") from e
    return parse_scenario(data, defaults=defaults, name=path.stem)
