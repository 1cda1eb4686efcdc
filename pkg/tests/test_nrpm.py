import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from analysis import check_spc
from dynamics import (
    NetworkPayoffMaximization,
    Reallocation,
    SupportPattern,
    brute_force_p3,
    enumerate_supports_p3,
    nrpm_field,
    solve_p3,
    support_value,
    verify_support_pattern,
    z_star,
)
from environment import (
    LogPayoff,
    PayoffProfile,
    QuadraticPayoff,
    build_topology,
    random_state,
)
from utils.errors import OracleScaleError, SolverNonConvergenceError

CYCLE_X = np.array([0.5, 0.0, 0.5, 0.0])
CYCLE_Z = np.array([0.0, 0.5, 0.0, 0.5])


def _warm(d):
    return Reallocation(z=np.zeros(4), d=d, objective=0.0, kkt_residual=0.0)


def test_cycle_reallocation(cycle4, cycle_profile):
    realloc = solve_p3(cycle_profile, cycle4, CYCLE_X)
    np.testing.assert_allclose(realloc.z, CYCLE_Z, atol=1e-6)
    assert realloc.kkt_residual <= 1e-8
    assert verify_support_pattern(cycle_profile, cycle4, CYCLE_X, realloc)


def test_node_fractions_do_not_depend_on_warm_start(cycle4, cycle_profile):
    clockwise = solve_p3(
        cycle_profile, cycle4, CYCLE_X, warm_start=_warm({(0, 1): 0.5, (2, 3): 0.5})
    )
    counter = solve_p3(
        cycle_profile, cycle4, CYCLE_X, warm_start=_warm({(0, 3): 0.5, (2, 1): 0.5})
    )
    np.testing.assert_allclose(clockwise.z, counter.z, atol=1e-6)
    np.testing.assert_allclose(clockwise.z, CYCLE_Z, atol=1e-6)
    assert abs(clockwise.d[(0, 1)] - counter.d[(0, 1)]) > 0.1
    assert verify_support_pattern(cycle_profile, cycle4, CYCLE_X, clockwise)
    assert verify_support_pattern(cycle_profile, cycle4, CYCLE_X, counter)


def test_field_on_cycle(cycle4, cycle_profile):
    ev = nrpm_field(cycle_profile, cycle4, CYCLE_X)
    np.testing.assert_allclose(ev.xdot, [-0.5, 0.5, -0.5, 0.5], atol=1e-6)
    assert abs(float(np.sum(ev.xdot))) <= 1e-12


def test_nash_state_is_kept(triangle, middle_penalty):
    x = np.array([0.5, 0.0, 0.5])
    np.testing.assert_allclose(z_star(middle_penalty, triangle, x), x, atol=1e-12)


def test_middle_mass_moves_out(path3, middle_penalty):
    z = z_star(middle_penalty, path3, np.array([0.0, 1.0, 0.0]))
    np.testing.assert_allclose(z, [0.5, 0.0, 0.5], atol=1e-6)


def test_path_counterexample(path3, spc_profile):
    x = np.array([0.2, 0.8, 0.0])
    realloc = solve_p3(spc_profile, path3, x)
    np.testing.assert_allclose(realloc.z, [0.1, 0.1, 0.8], atol=1e-6)

    # Sending d_12 = 0.2 is feasible but not optimal; the unique optimum sends
    # 0.1 and keeps 0.1 at node 1. Both move mass from node 1 to node 2 although
    # u_1(0.2) = -2.2 > u_2(0.8) = -2.8.
    claimed_d12, optimal_d12 = 0.2, 0.1
    assert realloc.d[(0, 1)] == pytest.approx(optimal_d12, abs=1e-6)
    assert realloc.d[(0, 1)] != pytest.approx(claimed_d12, abs=1e-3)
    assert realloc.d[(0, 0)] == pytest.approx(0.1, abs=1e-6)
    assert realloc.d[(1, 2)] == pytest.approx(0.8, abs=1e-6)

    check = check_spc(spc_profile, path3, x, nrpm_field(spc_profile, path3, x).delta)
    assert not check.holds
    assert check.violations == [(0, 1)]

    grid = brute_force_p3(spc_profile, path3, x, grid_step=0.025)
    np.testing.assert_allclose(realloc.z, grid.z, atol=0.025)


def test_support_enumeration_agrees(path3, spc_profile):
    x = np.array([0.2, 0.8, 0.0])
    oracle = enumerate_supports_p3(spc_profile, path3, x)
    np.testing.assert_allclose(oracle.z, [0.1, 0.1, 0.8], atol=1e-9)
    np.testing.assert_allclose(solve_p3(spc_profile, path3, x).z, oracle.z, atol=1e-6)


def test_support_values(cycle4, cycle_profile):
    x = np.array([0.1, 0.2, 0.3, 0.4])
    identity = SupportPattern.identity(4)
    np.testing.assert_allclose(support_value(cycle_profile, cycle4, x, identity), x, atol=1e-12)

    bipartite = SupportPattern(frozenset({(0, 1), (0, 3), (2, 1), (2, 3)}))
    np.testing.assert_allclose(
        support_value(cycle_profile, cycle4, CYCLE_X, bipartite), CYCLE_Z, atol=1e-12
    )
    assert np.all(support_value(cycle_profile, cycle4, x, SupportPattern()) == 0.0)


def test_grid_oracle_on_cycle(cycle4, cycle_profile):
    grid = brute_force_p3(cycle_profile, cycle4, CYCLE_X, grid_step=0.05)
    np.testing.assert_allclose(grid.z, CYCLE_Z, atol=1e-12)


def test_oracle_scale_limits(cycle4, cycle_profile):
    with pytest.raises(OracleScaleError):
        brute_force_p3(cycle_profile, cycle4, CYCLE_X, grid_step=0.01)
    with pytest.raises(OracleScaleError):
        brute_force_p3(cycle_profile, cycle4, np.full(4, 0.25), grid_step=0.05)


def test_iteration_cap_raises(cycle4, cycle_profile):
    with pytest.raises(SolverNonConvergenceError):
        solve_p3(cycle_profile, cycle4, CYCLE_X, max_iter=1)


def test_field_warm_starts_from_previous_solve(cycle4, cycle_profile):
    field = NetworkPayoffMaximization(cycle_profile, cycle4)
    first = field.solve(np.array([0.4, 0.1, 0.4, 0.1]))
    second = field.solve(np.array([0.39, 0.11, 0.39, 0.11]))
    expected = z_star(cycle_profile, cycle4, [0.39, 0.11, 0.39, 0.11])
    np.testing.assert_allclose(second.z, expected, atol=1e-6)
    assert field.last is second
    assert first.iterations > 0
    field.reset()
    assert field.last is None


profiles = st.lists(
    st.one_of(
        st.builds(QuadraticPayoff, a=st.floats(0.0, 3.0), c=st.floats(0.5, 2.0)),
        st.builds(LogPayoff, w=st.floats(0.5, 2.0), s=st.floats(0.5, 1.5)),
    ),
    min_size=4,
    max_size=4,
).map(lambda fs: PayoffProfile(tuple(fs)))

GRAPH = build_topology(4, [(1, 2), (2, 3), (3, 4), (2, 4)])


@settings(max_examples=25, deadline=None)
@given(profiles, st.integers(0, 2**32 - 1))
def test_reallocation_properties(profile, seed):
    x = random_state(np.random.default_rng(seed), GRAPH.node_count)
    realloc = solve_p3(profile, GRAPH, x)

    assert realloc.objective >= profile.social_utility(x) - 1e-12
    assert realloc.kkt_residual <= 1e-8
    for i in range(GRAPH.node_count):
        sent = sum(realloc.d[(i, j)] for j in GRAPH.closed_neighborhood(i))
        assert sent == pytest.approx(x[i], abs=1e-10)
    u = profile.densities(realloc.z)
    for (i, j), v in realloc.d.items():
        if v > 1e-7:
            assert u[j] >= u[i] - 1e-6
    assert verify_support_pattern(profile, GRAPH, x, realloc)


@settings(max_examples=15, deadline=None)
@given(profiles, st.integers(0, 2**32 - 1))
def test_unique_node_fractions(profile, seed):
    rng = np.random.default_rng(seed)
    x = random_state(rng, GRAPH.node_count)
    reference = solve_p3(profile, GRAPH, x).z
    for _ in range(3):
        d = {arc: float(rng.random()) for arc in GRAPH.closure_arcs()}
        warm = Reallocation(z=np.zeros(4), d=d, objective=0.0, kkt_residual=0.0)
        np.testing.assert_allclose(solve_p3(profile, GRAPH, x, warm).z, reference, atol=1e-6)
