from dataclasses import dataclass, field
from typing import Dict, Iterable, NamedTuple, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy import sparse
from scipy.cluster.hierarchy import DisjointSet

from utils.errors import (
    DisconnectedGraphError,
    DuplicateEdgeError,
    NodeLabelError,
    SelfLoopError,
    TopologyError,
)

Arc = Tuple[int, int]

SUPPORT_TOL = 1e-9


@dataclass(frozen=True)
class NetworkTopology:
    """Undirected connected graph with its lexicographically ordered arc set.

    Nodes are 0-based here; the 1-based labels of scenario files are
    converted by ``build_topology``.
    """

    node_count: int
    edges: Tuple[Arc, ...]
    arcs: Tuple[Arc, ...]
    arc_index: Dict[Arc, int] = field(compare=False, repr=False)
    neighbors: Tuple[Tuple[int, ...], ...] = field(compare=False, repr=False)
    sources: np.ndarray = field(compare=False, repr=False)
    targets: np.ndarray = field(compare=False, repr=False)

    @property
    def arc_count(self) -> int:
        return len(self.arcs)

    @property
    def max_degree(self) -> int:
        return max(len(n) for n in self.neighbors)

    def closed_neighborhood(self, i: int) -> Tuple[int, ...]:
        """Node i followed by its sorted neighbors"""
        return (i, *self.neighbors[i])

    def closure_arcs(self) -> Tuple[Arc, ...]:
        """Self-pairs (i, i) and the arcs, grouped by source node"""
        return tuple((i, j) for i in range(self.node_count) for j in self.closed_neighborhood(i))

    def has_arc(self, arc: Arc) -> bool:
        return arc in self.arc_index

    def incidence_matrix(self) -> sparse.csc_matrix:
        """N x 2M matrix with -1 at the source row and +1 at the target row of each arc"""
        m = self.arc_count
        rows = np.concatenate([self.sources, self.targets])
        cols = np.concatenate([np.arange(m), np.arange(m)])
        data = np.concatenate([-np.ones(m), np.ones(m)])
        return sparse.csc_matrix((data, (rows, cols)), shape=(self.node_count, m))

    def to_dict(self) -> dict:
        return {
            "node_count": self.node_count,
            "edges": [[i + 1, j + 1] for i, j in self.edges],
        }


@dataclass(frozen=True)
class FlowVector:
    """Arc-indexed nonnegative outflows aligned with ``NetworkTopology.arcs``"""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError(f"Flow vector must be one-dimensional, got shape {values.shape}")
        if values.size and np.min(values) < 0.0:
            raise ValueError(f"Flow vector has a negative entry: {np.min(values)}")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, topology: NetworkTopology) -> "FlowVector":
        return cls(np.zeros(topology.arc_count))

    def __len__(self) -> int:
        return int(self.values.size)

    def at(self, topology: NetworkTopology, arc: Arc) -> float:
        return float(self.values[topology.arc_index[arc]])


class FlowSupport(NamedTuple):
    graph: nx.DiGraph
    acyclic: bool


def build_topology(node_count: int, edges: Iterable[Sequence[int]]) -> NetworkTopology:
    """Build a topology from 1-based undirected edge labels"""
    if isinstance(node_count, bool) or not isinstance(node_count, (int, np.integer)):
        raise TopologyError(f"node_count must be an integer, got {node_count!r}")
    if node_count < 2:
        raise TopologyError(f"node_count must be at least 2, got {node_count}")

    seen = set()
    pairs = []
    for k, edge in enumerate(edges):
        if len(edge) != 2:
            raise TopologyError(f"edges[{k}]: expected a pair of node labels, got {edge!r}")
        a, b = edge
        for label in (a, b):
            if isinstance(label, bool) or not isinstance(label, (int, np.integer)):
                raise NodeLabelError(f"edges[{k}]: node label {label!r} is not an integer")
            if not 1 <= label <= node_count:
                raise NodeLabelError(f"edges[{k}]: node label {label} outside [1, {node_count}]")
        if a == b:
            raise SelfLoopError(f"edges[{k}]: self loop on node {a}")
        key = (min(a, b) - 1, max(a, b) - 1)
        if key in seen:
            raise DuplicateEdgeError(f"edges[{k}]: duplicate edge {{{a}, {b}}}")
        seen.add(key)
        pairs.append(key)

    components = DisjointSet(range(node_count))
    for i, j in pairs:
        components.merge(i, j)
    if components.n_subsets != 1:
        isolated = sorted(min(s) + 1 for s in components.subsets())
        raise DisconnectedGraphError(
            f"Graph is disconnected: {components.n_subsets} components (representatives {isolated})"
        )

    arcs = tuple(sorted([(i, j) for i, j in pairs] + [(j, i) for i, j in pairs]))
    neighbors = [[] for _ in range(node_count)]
    for i, j in arcs:
        neighbors[i].append(j)

    return NetworkTopology(
        node_count=int(node_count),
        edges=tuple(sorted(pairs)),
        arcs=arcs,
        arc_index={arc: m for m, arc in enumerate(arcs)},
        neighbors=tuple(tuple(n) for n in neighbors),
        sources=np.array([i for i, _ in arcs], dtype=int),
        targets=np.array([j for _, j in arcs], dtype=int),
    )


def apply_incidence(topology: NetworkTopology, delta: FlowVector) -> np.ndarray:
    """Net inflow per node: sum over neighbors of delta_ji - delta_ij"""
    values = delta.values if isinstance(delta, FlowVector) else np.asarray(delta, dtype=float)
    if values.shape != (topology.arc_count,):
        raise ValueError(
            f"Flow vector length {values.size} does not match arc count {topology.arc_count}"
        )
    n = topology.node_count
    inflow = np.bincount(topology.targets, weights=values, minlength=n)
    outflow = np.bincount(topology.sources, weights=values, minlength=n)
    return inflow - outflow


def support_flow_graph(
    topology: NetworkTopology, delta: FlowVector, tol: float = SUPPORT_TOL
) -> FlowSupport:
    if tol < 0:
        raise ValueError(f"tol must be nonnegative, got {tol}")
    graph = nx.DiGraph()
    graph.add_nodes_from(range(topology.node_count))
    for m, (i, j) in enumerate(topology.arcs):
        flow = float(delta.values[m])
        if flow > tol:
            graph.add_edge(i, j, flow=flow)
    return FlowSupport(graph=graph, acyclic=nx.is_directed_acyclic_graph(graph))
