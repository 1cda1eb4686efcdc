import numpy as np
import pytest

from analysis import POST_RUN_SUPPORT_TOL, is_nash
from analysis.properties import convergence_failures, random_profile, random_topology
from dynamics import FieldEvaluation, build_dynamics
from environment import FlowVector, build_topology, random_state
from simulator import (
    SimulationConfig,
    Simulator,
    dissipation,
    simulate,
    step_rk4,
    summary_fields,
    utility_rate,
)
from utils.errors import ConfigurationError, IntegrationError


def test_config_normalizes_kind():
    assert SimulationConfig(dynamics="NBRD").dynamics == "nbrd"


@pytest.mark.parametrize(
    "kwargs",
    [
        {"dynamics": "replicator"},
        {"h": 0.0},
        {"h": 0.1, "t_max": 0.05},
        {"tol_eq": 0.0},
        {"log_every": -1},
    ],
)
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ConfigurationError):
        SimulationConfig(**kwargs)


def test_config_from_env(monkeypatch):
    monkeypatch.setenv("SIM_DYNAMICS", "nrpm")
    monkeypatch.setenv("SIM_STEP", "0.05")
    cfg = SimulationConfig.from_env(t_max=10.0, h=None)
    assert cfg.dynamics == "nrpm"
    assert cfg.h == 0.05
    assert cfg.t_max == 10.0


def test_config_merge():
    cfg = SimulationConfig().merged({"h": 0.1, "t_max": None})
    assert cfg.h == 0.1
    assert cfg.t_max == 200.0
    with pytest.raises(ConfigurationError, match="unknown keys"):
        SimulationConfig().merged({"step": 0.1})


def test_rk4_keeps_nash_state(triangle, middle_penalty):
    field = build_dynamics("ssd", middle_penalty, triangle)
    x = np.array([0.5, 0.0, 0.5])
    np.testing.assert_array_equal(step_rk4(field, x, 0.01), x)


def test_rk4_step_preserves_symmetry(path3, middle_penalty):
    field = build_dynamics("ssd", middle_penalty, path3)
    nxt = step_rk4(field, np.array([0.0, 1.0, 0.0]), 0.01)
    assert nxt[0] == pytest.approx(nxt[2], abs=1e-15)
    assert 0.0 < nxt[1] < 1.0
    assert float(np.sum(nxt)) == pytest.approx(1.0, abs=1e-15)


def test_oversized_step_raises(path3, middle_penalty):
    field = build_dynamics("ssd", middle_penalty, path3)
    with pytest.raises(IntegrationError, match="reduce the step size"):
        step_rk4(field, np.array([0.0, 1.0, 0.0]), 1.0)

    cfg = SimulationConfig(dynamics="ssd", h=1.0, t_max=5.0, log_every=0)
    with pytest.raises(IntegrationError):
        simulate(middle_penalty, path3, np.array([0.0, 1.0, 0.0]), cfg)


def test_rest_point_converges_immediately(path3, middle_penalty):
    cfg = SimulationConfig(dynamics="ssd", h=0.01, t_max=1.0, log_every=0)
    trajectory = simulate(middle_penalty, path3, np.array([1.0, 0.0, 0.0]), cfg)
    assert trajectory.converged
    assert len(trajectory) == 1
    assert trajectory.t_final == 0.0


@pytest.mark.parametrize("kind", ["ssd", "nbrd", "nrpm"])
def test_middle_mass_settles_on_both_ends(path3, middle_penalty, kind):
    cfg = SimulationConfig(dynamics=kind, h=0.05, t_max=40.0, log_every=10)
    trajectory = Simulator(middle_penalty, path3, cfg).simulate(np.array([0.0, 1.0, 0.0]))

    assert trajectory.converged
    assert not trajectory.interrupted
    np.testing.assert_allclose(trajectory.final_state, [0.5, 0.0, 0.5], atol=1e-6)
    assert trajectory.utility_violations == 0
    assert np.all(np.diff(trajectory.utilities) >= -1e-9)
    assert max(trajectory.dissipations) <= 1e-12
    report = is_nash(
        middle_penalty,
        path3,
        trajectory.final_state,
        1e-6,
        support_tol=POST_RUN_SUPPORT_TOL,
        strict=False,
    )
    assert report.is_nash
    assert report.support == frozenset({0, 2})


@pytest.mark.parametrize("kind", ["ssd", "nbrd", "nrpm"])
def test_dissipation_matches_utility_rate(cycle4, cycle_profile, kind):
    field = build_dynamics(kind, cycle_profile, cycle4)
    x = np.array([0.4, 0.1, 0.3, 0.2])
    ev = field(x)
    assert dissipation(cycle_profile, cycle4, x, ev.delta) == pytest.approx(
        -utility_rate(cycle_profile, x, ev.xdot), abs=1e-12
    )


def test_unfinished_run_reports_not_converged(triangle, middle_penalty):
    cfg = SimulationConfig(dynamics="ssd", h=0.05, t_max=0.5, log_every=0)
    trajectory = simulate(middle_penalty, triangle, np.array([0.7, 0.2, 0.1]), cfg)
    assert not trajectory.converged
    assert trajectory.t_final == pytest.approx(0.5)
    assert len(trajectory) == 11


def test_trajectory_rows_and_summary(path3, middle_penalty):
    cfg = SimulationConfig(dynamics="nbrd", h=0.1, t_max=0.3, log_every=0)
    trajectory = simulate(middle_penalty, path3, np.array([0.0, 1.0, 0.0]), cfg)

    rows = list(trajectory.as_rows())
    assert len(rows) == len(trajectory) == 4
    assert len(rows[0]) == 1 + 3 + 3
    assert rows[0][:4] == [0.0, 0.0, 1.0, 0.0]

    summary = summary_fields(trajectory)
    assert summary["converged"] is False
    assert summary["x_final"] == pytest.approx(trajectory.final_state.tolist())
    assert summary["U_final"] == trajectory.utilities[-1]
    assert set(summary) == {"converged", "t_final", "x_final", "U_final"}


def test_leaking_field_raises(path3):
    def leaking(x):
        return FieldEvaluation(delta=FlowVector(np.zeros(path3.arc_count)), xdot=np.full(3, 1e-3))

    with pytest.raises(IntegrationError, match="does not conserve mass"):
        step_rk4(leaking, np.array([0.2, 0.5, 0.3]), 0.01)


@pytest.mark.parametrize("kind", ["nbrd", "nrpm"])
def test_reused_simulator_repeats_its_run(triangle, middle_penalty, kind):
    cfg = SimulationConfig(dynamics=kind, h=0.05, t_max=5.0, log_every=0, kkt_check_every=3)
    simulator = Simulator(middle_penalty, triangle, cfg)
    first = simulator.simulate(np.array([0.2, 0.5, 0.3]))
    second = simulator.simulate(np.array([0.2, 0.5, 0.3]))
    np.testing.assert_array_equal(np.array(first.states), np.array(second.states))


NAMED_GRAPHS = {
    "path3": (3, [(1, 2), (2, 3)]),
    "triangle": (3, [(1, 2), (1, 3), (2, 3)]),
    "cycle4": (4, [(1, 2), (2, 3), (3, 4), (1, 4)]),
    "random6": None,
}
GRAPH_SEEDS = {"path3": 3, "triangle": 5, "cycle4": 7, "random6": 11}
STARTS_PER_GRAPH = 2


@pytest.mark.parametrize("kind", ["ssd", "nbrd", "nrpm"])
@pytest.mark.parametrize("graph", list(NAMED_GRAPHS))
def test_random_starts_reach_nash(graph, kind):
    # the full sweep over many starts is `validate --suite integrator`
    rng = np.random.default_rng(GRAPH_SEEDS[graph])
    if NAMED_GRAPHS[graph] is None:
        topology = random_topology(rng, 6)
    else:
        topology = build_topology(*NAMED_GRAPHS[graph])
    profile = random_profile(rng, topology.node_count)
    cfg = SimulationConfig(dynamics=kind, h=0.05, t_max=200.0, log_every=0)

    for _ in range(STARTS_PER_GRAPH):
        x0 = random_state(rng, topology.node_count)
        trajectory = simulate(profile, topology, x0, cfg)
        assert convergence_failures(profile, topology, trajectory, kind) == []
        assert np.all(np.diff(trajectory.utilities) >= -1e-9)
        states = np.array(trajectory.states)
        assert np.all(np.abs(states.sum(axis=1) - 1.0) <= 1e-9)
        assert states.min() >= -1e-10
        if kind != "nrpm":
            assert max(trajectory.dissipations) <= 1e-12
