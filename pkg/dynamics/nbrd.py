import logging
from dataclasses import dataclass
from itertools import combinations
from logging import Logger
from typing import Dict, FrozenSet, Iterable, Mapping, Optional, Sequence

import numpy as np

from dynamics.base import FieldEvaluation
from dynamics.projection import project_scaled_simplex
from environment import (
    FlowVector,
    NetworkTopology,
    PayoffProfile,
    apply_incidence,
    clean_state,
)
from utils.errors import (
    InfeasibleAllocationError,
    KktViolationError,
    LevelSolveError,
    OracleScaleError,
)

KKT_TOL = 1e-8
FEASIBILITY_TOL = 1e-10
# raw allocation sum against x_i, before the exact rescale
ALLOCATION_TOL = 1e-9
ORACLE_MAX_CANDIDATES = 20


@dataclass(frozen=True)
class BestResponse:
    """Optimal split of node i's mass over itself and its neighbors"""

    node: int
    d: Dict[int, float]
    eta: Optional[float]
    support: FrozenSet[int]

    def to_dict(self) -> dict:
        return {
            "node": self.node + 1,
            "d": {str(j + 1): v for j, v in sorted(self.d.items())},
            "eta": self.eta,
            "support": sorted(j + 1 for j in self.support),
        }


def _admits_candidate(entry: float, level: float) -> bool:
    # a candidate whose entry level equals the current level is left out
    return entry > level


def _empty_response(i: int, candidates: Sequence[int]) -> BestResponse:
    return BestResponse(node=i, d={j: 0.0 for j in candidates}, eta=None, support=frozenset())


def _allocate(
    profile: PayoffProfile,
    x: np.ndarray,
    i: int,
    candidates: Sequence[int],
    members: Iterable[int],
    eta: float,
) -> BestResponse:
    """Allocations from a level, rescaled so they sum to x_i exactly.

    The level must already balance node i's mass to ALLOCATION_TOL; the
    rescale only removes root-finding round-off.
    """
    d = {j: 0.0 for j in candidates}
    for j in members:
        target = profile.inverse_density(j, eta).value
        d[j] = max(0.0, target if j == i else target - float(x[j]))
    total = sum(d.values())
    if total <= 0.0:
        raise InfeasibleAllocationError(f"Level {eta} allocates no mass for node {i + 1}")
    if abs(total - float(x[i])) > ALLOCATION_TOL:
        raise InfeasibleAllocationError(
            f"Level {eta} allocates {total} for node {i + 1}, which holds {float(x[i])}"
        )
    scale = float(x[i]) / total
    d = {j: v * scale for j, v in d.items()}
    return BestResponse(
        node=i, d=d, eta=eta, support=frozenset(j for j, v in d.items() if v > 0.0)
    )


def solve_node_best_response(
    profile: PayoffProfile, topology: NetworkTopology, x: np.ndarray, i: int
) -> BestResponse:
    """Greedy waterfilling for node i's best response.

    Candidates enter in descending order of their entry level (u_j(x_j) for
    neighbors, u_i(0) for i itself); the level of the growing prefix rises
    until the next entry no longer exceeds it.
    """
    state = clean_state(x)
    candidates = topology.closed_neighborhood(i)
    xi = float(state[i])
    if xi <= 0.0:
        return _empty_response(i, candidates)

    entries = {
        j: profile.density(i, 0.0) if j == i else profile.density(j, state[j])
        for j in candidates
    }
    order = sorted(candidates, key=lambda j: (-entries[j], j))

    members = []
    mass = xi
    eta = None
    for j in order:
        if eta is not None and not _admits_candidate(entries[j], eta):
            break
        members.append(j)
        if j != i:
            mass += float(state[j])
        eta = profile.level_solve(members, mass)

    return _allocate(profile, state, i, candidates, members, eta)


def verify_kkt_p2(
    profile: PayoffProfile,
    topology: NetworkTopology,
    x: np.ndarray,
    i: int,
    br: BestResponse,
) -> float:
    """Largest KKT violation of a candidate best response, with lambda = eta"""
    state = clean_state(x)
    candidates = topology.closed_neighborhood(i)
    d = {j: float(br.d.get(j, 0.0)) for j in candidates}
    unknown = set(br.d) - set(candidates)
    if unknown:
        raise InfeasibleAllocationError(
            f"Allocation to non-neighbors {sorted(k + 1 for k in unknown)} of node {i + 1}"
        )
    negative = {j: v for j, v in d.items() if v < 0.0}
    if negative:
        raise InfeasibleAllocationError(f"Negative allocations for node {i + 1}: {negative}")
    xi = float(state[i])
    if abs(sum(d.values()) - xi) > FEASIBILITY_TOL:
        raise InfeasibleAllocationError(
            f"Allocations of node {i + 1} sum to {sum(d.values())}, expected {xi}"
        )
    if xi <= 0.0:
        return 0.0
    if br.eta is None:
        raise InfeasibleAllocationError(f"Best response of occupied node {i + 1} has no level")

    residual = 0.0
    for j, dj in d.items():
        reached = profile.density(i, dj) if j == i else profile.density(j, state[j] + dj)
        mu = br.eta - reached
        residual = max(residual, -mu, abs(mu * dj))
    return residual


def enumerate_supports_p2(
    profile: PayoffProfile, topology: NetworkTopology, x: np.ndarray, i: int
) -> BestResponse:
    """Exhaustive best response over every candidate support; oracle for the waterfilling"""
    state = clean_state(x)
    candidates = topology.closed_neighborhood(i)
    if len(candidates) > ORACLE_MAX_CANDIDATES:
        raise OracleScaleError(
            f"Node {i + 1} has {len(candidates)} candidates, "
            f"oracle limit is {ORACLE_MAX_CANDIDATES}"
        )
    xi = float(state[i])
    if xi <= 0.0:
        return _empty_response(i, candidates)

    best = None
    best_score = -np.inf
    for size in range(1, len(candidates) + 1):
        for support in combinations(candidates, size):
            mass = xi + sum(float(state[j]) for j in support if j != i)
            try:
                eta = profile.level_solve(support, mass)
            except LevelSolveError:
                continue
            w = {j: profile.inverse_density(j, eta).value for j in candidates}
            if not _support_feasible(state, i, candidates, support, w):
                continue
            score = sum(
                profile.cumulative(j, w[j]) - profile.cumulative(j, state[j])
                for j in support
                if j != i
            )
            if i in support:
                score += profile.cumulative(i, w[i]) - profile.cumulative(i, 0.0)
            if score > best_score:
                best, best_score = (support, eta), score

    if best is None:
        raise InfeasibleAllocationError(f"No feasible support for node {i + 1}")
    support, eta = best
    return _allocate(profile, state, i, candidates, support, eta)


def _support_feasible(
    state: np.ndarray,
    i: int,
    candidates: Sequence[int],
    support: Sequence[int],
    w: Mapping[int, float],
) -> bool:
    inside = set(support)
    for j in candidates:
        base = 0.0 if j == i else float(state[j])
        if j in inside and w[j] - base < -FEASIBILITY_TOL:
            return False
        # left out: the candidate's entry level may not exceed the common level
        if j not in inside and w[j] - base > FEASIBILITY_TOL:
            return False
    return True


def resolve_p2_projected(
    profile: PayoffProfile,
    topology: NetworkTopology,
    x: np.ndarray,
    i: int,
    start: Sequence[float],
    tol: float = 1e-11,
    max_iter: int = 100_000,
) -> BestResponse:
    """Projected-gradient ascent on node i's program from a given start.

    ``start`` is ordered like ``topology.closed_neighborhood(i)`` and is
    projected onto the feasible set before the first step.
    """
    state = clean_state(x)
    candidates = topology.closed_neighborhood(i)
    xi = float(state[i])
    if xi <= 0.0:
        return _empty_response(i, candidates)

    base = np.array([0.0 if j == i else float(state[j]) for j in candidates])
    step = 1.0 / max(profile.functions[j].max_slope for j in candidates)
    d = project_scaled_simplex(np.asarray(start, dtype=float), xi)

    def gradient(alloc: np.ndarray) -> np.ndarray:
        return np.array(
            [profile.density(j, min(b + a, 1.0)) for j, b, a in zip(candidates, base, alloc)]
        )

    for _ in range(max_iter):
        moved = project_scaled_simplex(d + step * gradient(d), xi)
        change = np.max(np.abs(moved - d)) / step
        d = moved
        if change <= tol:
            break

    levels = gradient(d)
    occupied = d > 0.0
    eta = float(np.max(levels[occupied])) if occupied.any() else None
    alloc = {j: float(v) for j, v in zip(candidates, d)}
    return BestResponse(
        node=i, d=alloc, eta=eta, support=frozenset(j for j, v in alloc.items() if v > 0.0)
    )


def nbrd_field(
    profile: PayoffProfile, topology: NetworkTopology, x: np.ndarray
) -> FieldEvaluation:
    state = clean_state(x)
    values = np.zeros(topology.arc_count)
    for i in range(topology.node_count):
        br = solve_node_best_response(profile, topology, state, i)
        for j in topology.neighbors[i]:
            values[topology.arc_index[(i, j)]] = br.d[j]
    delta = FlowVector(values)
    return FieldEvaluation(delta=delta, xdot=apply_incidence(topology, delta))


class NodalBestResponseDynamics:
    kind = "nbrd"

    def __init__(
        self,
        profile: PayoffProfile,
        topology: NetworkTopology,
        kkt_check_every: int = 100,
        kkt_tol: float = KKT_TOL,
        logger: Optional[Logger] = None,
    ) -> None:
        self.profile = profile
        self.topology = topology
        self.kkt_check_every = kkt_check_every
        self.kkt_tol = kkt_tol
        self.solves = 0
        self.logger = logger or logging.getLogger(__name__)
        self.logger.debug(
            f"Initialized NBRD field on {topology.node_count} nodes, "
            f"KKT check every {kkt_check_every} solves"
        )

    def best_response(self, x: np.ndarray, i: int) -> BestResponse:
        br = solve_node_best_response(self.profile, self.topology, x, i)
        self.solves += 1
        if self.kkt_check_every > 0 and self.solves % self.kkt_check_every == 0:
            residual = verify_kkt_p2(self.profile, self.topology, x, i, br)
            if residual > self.kkt_tol:
                self.logger.error(
                    f"Best response of node {i + 1} violates KKT by {residual:.3e} at x={x}"
                )
                raise KktViolationError(
                    f"KKT residual {residual:.3e} for node {i + 1} exceeds {self.kkt_tol}"
                )
        return br

    def reset(self) -> None:
        self.solves = 0

    def field(self, x: np.ndarray) -> FieldEvaluation:
        state = clean_state(x)
        values = np.zeros(self.topology.arc_count)
        for i in range(self.topology.node_count):
            br = self.best_response(state, i)
            for j in self.topology.neighbors[i]:
                values[self.topology.arc_index[(i, j)]] = br.d[j]
        delta = FlowVector(values)
        return FieldEvaluation(delta=delta, xdot=apply_incidence(self.topology, delta))

    __call__ = field
