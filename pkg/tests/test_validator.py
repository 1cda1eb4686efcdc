import json

import numpy as np
import pytest

import dynamics.nbrd
from analysis import global_waterfill, is_nash
from analysis.properties import (
    PERTURBATION,
    PropertyInstance,
    perturbed_nash_states,
    restricted_optima,
)
from environment import PayoffProfile, build_topology
from utils.errors import EXIT_OK, EXIT_PROPERTY_FAILURE, ConfigurationError
from validator import Validator, case_rng, generate_case, run_validate


def test_cases_replay_from_seed_and_index():
    first = generate_case(11, 3)
    again = generate_case(11, 3)
    assert first.topology == again.topology
    assert first.profile == again.profile
    for a, b in zip(first.states, again.states):
        np.testing.assert_array_equal(a, b)
    assert 3 <= first.topology.node_count <= 6

    other = generate_case(11, 4)
    assert other.topology != first.topology or other.profile != first.profile


def test_case_streams_are_independent():
    a = case_rng(5, 0).random(4)
    b = case_rng(5, 1).random(4)
    assert not np.allclose(a, b)
    np.testing.assert_array_equal(a, case_rng(5, 0).random(4))


def test_cheap_suites_pass(tmp_path):
    code, report = run_validate(
        seed=7, cases=2, suites=["graph", "payoff"], failure_dir=tmp_path
    )
    assert code == EXIT_OK
    assert report.passed
    assert {case for case, _ in report.results} == {0, 1}
    assert "PASS" in report.table()
    assert not list(tmp_path.iterdir())


def test_broken_stop_rule_is_caught(monkeypatch, tmp_path):
    monkeypatch.setattr(dynamics.nbrd, "_admits_candidate", lambda entry, level: False)
    code, report = run_validate(seed=3, cases=3, suites=["nbrd"], failure_dir=tmp_path)

    assert code == EXIT_PROPERTY_FAILURE
    failing = {r.name for _, r in report.failures}
    assert failing & {"kkt_residual", "greedy_matches_oracle"}
    assert "FAIL" in report.table()

    written = sorted(tmp_path.glob("seed3_case*.json"))
    assert written
    payload = json.loads(written[0].read_text(encoding="utf-8"))
    assert payload["seed"] == 3
    assert payload["replay"].startswith("validate --seed 3 --case ")
    assert payload["failures"]
    assert len(payload["x0"]) == payload["graph"]["node_count"]


def test_single_case_replay(tmp_path):
    code, report = run_validate(
        seed=7, cases=50, case=4, suites=["graph"], failure_dir=tmp_path
    )
    assert code == EXIT_OK
    assert {case for case, _ in report.results} == {4}


@pytest.mark.parametrize(
    "kwargs",
    [
        {"seed": -1},
        {"seed": 1, "suites": ["spectral"]},
    ],
)
def test_validator_rejects_bad_arguments(kwargs, tmp_path):
    with pytest.raises(ConfigurationError):
        Validator(failure_dir=tmp_path, **kwargs)


def test_run_validate_rejects_bad_case_counts(tmp_path):
    with pytest.raises(ConfigurationError):
        run_validate(seed=1, cases=0, failure_dir=tmp_path)
    with pytest.raises(ConfigurationError):
        run_validate(seed=1, cases=1, case=-2, failure_dir=tmp_path)


@pytest.mark.parametrize(
    ("suite", "cases"),
    [("ssd", 2), ("nbrd", 2), ("nrpm", 2), ("analysis", 2), ("integrator", 1)],
)
def test_suites_pass_on_the_implementation(suite, cases, tmp_path):
    code, report = run_validate(seed=42, cases=cases, suites=[suite], failure_dir=tmp_path)
    assert report.failures == []
    assert code == EXIT_OK
    names = {r.name for _, r in report.results}
    if suite in ("ssd", "nbrd", "nrpm"):
        assert {"equilibria_are_nash", "perturbed_nash_rejected"} <= names
    if suite == "integrator":
        assert {"ssd_convergence", "nbrd_convergence", "nrpm_convergence"} <= names


def _instance(topology, profile, seed=0):
    return PropertyInstance(
        topology=topology, profile=profile, states=[], rng=np.random.default_rng(seed)
    )


def test_perturbed_nash_states_are_rejected(path3, middle_penalty):
    inst = _instance(path3, middle_penalty)
    x_star = global_waterfill(middle_penalty)
    states = perturbed_nash_states(inst, x_star)

    # both ends give PERTURBATION to the empty, dominated middle
    assert len(states) == 2
    for x in states:
        assert x[1] == pytest.approx(PERTURBATION)
        assert float(np.sum(x)) == pytest.approx(1.0, abs=1e-15)
        assert not is_nash(middle_penalty, path3, x, 1e-8).is_nash


def test_perturbations_between_occupied_neighbours():
    cycle = build_topology(4, [(1, 2), (2, 3), (3, 4), (1, 4)])
    profile = PayoffProfile.quadratic([0.0] * 4)
    inst = _instance(cycle, profile)
    states = perturbed_nash_states(inst, global_waterfill(profile))
    assert len(states) == cycle.arc_count
    assert not any(is_nash(profile, cycle, x, 1e-8).is_nash for x in states)


def test_restricted_optima_include_the_global_one(path3, middle_penalty):
    states = restricted_optima(_instance(path3, middle_penalty, seed=5), count=6)
    assert len(states) == 7
    np.testing.assert_allclose(states[0], [0.5, 0.0, 0.5], atol=1e-12)
    for x in states:
        assert float(np.sum(x)) == pytest.approx(1.0, abs=1e-12)
        assert x.min() >= 0.0
