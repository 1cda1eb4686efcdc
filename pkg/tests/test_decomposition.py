import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from environment import build_topology, od_decompose
from utils.errors import TopologyError


def test_two_component_pattern(path5):
    # 1-based pattern {(1,2),(2,2),(2,3),(3,3),(3,4),(4,5)}
    pattern = [(0, 1), (1, 1), (1, 2), (2, 2), (2, 3), (3, 4)]
    od = od_decompose(path5, pattern)

    assert od.components == (
        (frozenset({0, 1, 2}), frozenset({1, 2, 3})),
        (frozenset({3}), frozenset({4})),
    )
    assert od.uncovered_destinations == frozenset({0})
    assert od.to_dict() == [
        {"origins": [1, 2, 3], "destinations": [2, 3, 4]},
        {"origins": [4], "destinations": [5]},
    ]


def test_identity_pattern_gives_singletons(cycle4):
    od = od_decompose(cycle4, [(i, i) for i in range(4)])
    assert od.components == tuple((frozenset({i}), frozenset({i})) for i in range(4))
    assert od.uncovered_destinations == frozenset()


def test_empty_pattern(triangle):
    od = od_decompose(triangle, [])
    assert od.components == ()
    assert od.uncovered_destinations == frozenset({0, 1, 2})


def test_rejects_non_arcs(path3):
    with pytest.raises(TopologyError):
        od_decompose(path3, [(0, 2)])


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_components_partition_origins_and_destinations(data):
    topology = build_topology(5, [(1, 2), (1, 3), (2, 4), (3, 4), (4, 5)])
    closure = list(topology.closure_arcs())
    pattern = data.draw(st.lists(st.sampled_from(closure), unique=True))
    od = od_decompose(topology, pattern)

    origins = [k for o, _ in od.components for k in o]
    destinations = [k for _, d in od.components for k in d]
    assert len(origins) == len(set(origins))
    assert len(destinations) == len(set(destinations))
    assert {i for i, _ in pattern} == set(origins)
    assert od.uncovered_destinations == frozenset(range(5)) - {j for _, j in pattern}
    for o, d in od.components:
        assert o and d
