from dataclasses import dataclass
from typing import FrozenSet, Iterable, Tuple

from scipy.cluster.hierarchy import DisjointSet

from environment.network import Arc, NetworkTopology
from utils.errors import TopologyError

Component = Tuple[FrozenSet[int], FrozenSet[int]]


@dataclass(frozen=True)
class OdDecomposition:
    """Origin/destination groups of a flow-support pattern.

    Each component pairs the origins O^r with the destinations D^r reached
    from them; ``uncovered_destinations`` lists nodes no arc of the pattern
    enters, whose post-reallocation mass is forced to zero.
    """

    components: Tuple[Component, ...]
    uncovered_destinations: FrozenSet[int]

    @property
    def origins(self) -> FrozenSet[int]:
        return frozenset().union(*(o for o, _ in self.components))

    def to_dict(self) -> list:
        return [
            {"origins": sorted(k + 1 for k in o), "destinations": sorted(k + 1 for k in d)}
            for o, d in self.components
        ]


def validate_pattern(topology: NetworkTopology, pattern: Iterable[Arc]) -> FrozenSet[Arc]:
    arcs = frozenset((int(i), int(j)) for i, j in pattern)
    for i, j in sorted(arcs):
        if i == j and 0 <= i < topology.node_count:
            continue
        if not topology.has_arc((i, j)):
            raise TopologyError(f"Arc ({i + 1}, {j + 1}) is neither a graph arc nor a self-pair")
    return arcs


def od_decompose(topology: NetworkTopology, pattern: Iterable[Arc]) -> OdDecomposition:
    n = topology.node_count
    arcs = validate_pattern(topology, pattern)

    # doubled node set: origin copy i, destination copy n + i
    doubled = DisjointSet()
    for i, j in sorted(arcs):
        doubled.add(i)
        doubled.add(n + j)
        doubled.merge(i, n + j)

    components = []
    for group in doubled.subsets():
        origins = frozenset(k for k in group if k < n)
        destinations = frozenset(k - n for k in group if k >= n)
        components.append((origins, destinations))
    components.sort(key=lambda c: (min(c[0]), min(c[1])))

    covered = {j for _, j in arcs}
    return OdDecomposition(
        components=tuple(components),
        uncovered_destinations=frozenset(range(n)) - covered,
    )
