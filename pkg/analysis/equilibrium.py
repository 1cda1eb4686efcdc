from dataclasses import dataclass
from typing import FrozenSet, List, NamedTuple, Tuple

import numpy as np

from dynamics import build_dynamics
from environment import Arc, FlowVector, NetworkTopology, PayoffProfile, clean_state
from utils.errors import TopologyError

NASH_TOL = 1e-6
ANALYTIC_NASH_TOL = 1e-10
SUPPORT_TOL = 1e-9
# end-of-run checks: a converged trajectory leaves residual-sized mass behind
POST_RUN_SUPPORT_TOL = 1e-6
SPC_TOL = 1e-12


@dataclass(frozen=True)
class NashReport:
    """Nash check over occupied nodes.

    Nodes with 0 < x_i <= support_tol form ``boundary_nodes``; their worst
    violation is reported separately and, under the strict reading, must
    also stay within tolerance.
    """

    is_nash: bool
    worst_violation: float
    support: FrozenSet[int]
    boundary_nodes: FrozenSet[int] = frozenset()
    boundary_violation: float = 0.0

    def to_dict(self) -> dict:
        return {
            "is_nash": self.is_nash,
            "worst_violation": self.worst_violation,
            "support": sorted(i + 1 for i in self.support),
            "boundary_nodes": sorted(i + 1 for i in self.boundary_nodes),
            "boundary_violation": self.boundary_violation,
        }


class SpcCheck(NamedTuple):
    holds: bool
    violations: List[Arc]


def _node_violation(topology: NetworkTopology, u: np.ndarray, i: int) -> float:
    gaps = [float(u[j] - u[i]) for j in topology.neighbors[i]]
    return max([0.0, *gaps])


def is_nash(
    profile: PayoffProfile,
    topology: NetworkTopology,
    x: np.ndarray,
    tol: float = NASH_TOL,
    support_tol: float = SUPPORT_TOL,
    strict: bool = True,
) -> NashReport:
    """Check u_i(x_i) >= u_j(x_j) - tol for occupied i and neighbors j.

    ``strict`` re-reads boundary nodes as occupied. Post-simulation checks
    pass ``strict=False`` with a support threshold matched to the residual
    tolerance, since a converged trajectory leaves residual-sized mass on
    dominated nodes.
    """
    state = clean_state(x)
    u = profile.densities(state)
    support = frozenset(i for i in range(topology.node_count) if state[i] > support_tol)
    boundary = frozenset(
        i for i in range(topology.node_count) if 0.0 < state[i] <= support_tol
    )
    worst = max((_node_violation(topology, u, i) for i in support), default=0.0)
    boundary_worst = max((_node_violation(topology, u, i) for i in boundary), default=0.0)
    verdict = bool(worst <= tol and (not strict or boundary_worst <= tol))
    return NashReport(
        is_nash=verdict,
        worst_violation=float(worst),
        support=support,
        boundary_nodes=boundary,
        boundary_violation=float(boundary_worst),
    )


def check_spc(
    profile: PayoffProfile,
    topology: NetworkTopology,
    x: np.ndarray,
    delta: FlowVector,
    tol: float = SPC_TOL,
) -> SpcCheck:
    """No flow may leave a node whose density is at least its neighbor's"""
    u = profile.densities(clean_state(x))
    violations = [
        (i, j)
        for m, (i, j) in enumerate(topology.arcs)
        if u[i] >= u[j] and delta.values[m] > tol
    ]
    return SpcCheck(holds=not violations, violations=violations)


def equilibrium_residual(
    profile: PayoffProfile, topology: NetworkTopology, x: np.ndarray, kind: str
) -> float:
    field = build_dynamics(kind, profile, topology, kkt_check_every=1)
    return float(np.max(np.abs(field(x).xdot)))


def global_waterfill_level(profile: PayoffProfile) -> Tuple[np.ndarray, float]:
    """Maximizer of U over the whole simplex and its common density level"""
    n = profile.node_count
    entries = [profile.density(i, 0.0) for i in range(n)]
    order = sorted(range(n), key=lambda i: (-entries[i], i))

    members = []
    level = None
    for i in order:
        if level is not None and entries[i] <= level:
            break
        members.append(i)
        level = profile.level_solve(members, 1.0)

    x = np.zeros(n)
    for i in members:
        x[i] = profile.inverse_density(i, level).value
    return x / x.sum(), float(level)


def global_waterfill(profile: PayoffProfile) -> np.ndarray:
    return global_waterfill_level(profile)[0]


def is_refinement_nash(
    profile: PayoffProfile,
    coarse: NetworkTopology,
    fine: NetworkTopology,
    x: np.ndarray,
    tol: float = ANALYTIC_NASH_TOL,
) -> bool:
    """Adding edges can only remove Nash points: Nash on ``fine`` implies Nash on ``coarse``"""
    if coarse.node_count != fine.node_count or not set(coarse.edges) <= set(fine.edges):
        raise TopologyError("The fine graph must contain every edge of the coarse graph")
    if not is_nash(profile, fine, x, tol).is_nash:
        return True
    return is_nash(profile, coarse, x, tol).is_nash
