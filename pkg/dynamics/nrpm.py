import logging
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations, product
from logging import Logger
from typing import Dict, FrozenSet, Iterator, List, Optional, Tuple

import numpy as np
from scipy import optimize

from dynamics.base import FieldEvaluation
from dynamics.projection import project_block_simplices
from environment import (
    Arc,
    FlowVector,
    NetworkTopology,
    OdDecomposition,
    PayoffProfile,
    clean_state,
    od_decompose,
)
from utils.errors import LevelSolveError, OracleScaleError, SolverNonConvergenceError

PG_TOL = 1e-9
PG_MAX_ITER = 100_000
PG_FAIL_TOL = 1e-6
PATTERN_TOL = 1e-9
SUPPORT_MATCH_TOL = 1e-6
BRUTE_FORCE_MAX_DIM = 8
BRUTE_FORCE_MIN_STEP = 0.025
ENUMERATION_MAX_ARCS = 12

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Reallocation:
    """One optimizer d* of the network program and its unique node fractions z*"""

    z: np.ndarray
    d: Dict[Arc, float]
    objective: float
    kkt_residual: float
    iterations: int = 0

    def to_dict(self, od: Optional[OdDecomposition] = None) -> dict:
        out = {
            "z": [float(v) for v in self.z],
            "d": [[i + 1, j + 1, v] for (i, j), v in sorted(self.d.items()) if v > 0.0],
            "kkt_residual": self.kkt_residual,
        }
        if od is not None:
            out["od_components"] = od.to_dict()
        return out


@dataclass(frozen=True)
class SupportPattern:
    arcs: FrozenSet[Arc] = field(default_factory=frozenset)

    @classmethod
    def from_reallocation(cls, realloc: Reallocation, tol: float = PATTERN_TOL) -> "SupportPattern":
        return cls(frozenset(arc for arc, v in realloc.d.items() if v > tol))

    @classmethod
    def identity(cls, node_count: int) -> "SupportPattern":
        return cls(frozenset((i, i) for i in range(node_count)))


@dataclass(frozen=True)
class _BlockLayout:
    """Padded per-node blocks: row i holds d_ii followed by d_ij for sorted neighbors j"""

    dest: np.ndarray
    mask: np.ndarray
    arcs: Tuple[Arc, ...]

    @property
    def width(self) -> int:
        return self.mask.shape[1]


@lru_cache(maxsize=64)
def _layout(topology: NetworkTopology) -> _BlockLayout:
    n = topology.node_count
    width = topology.max_degree + 1
    dest = np.zeros((n, width), dtype=int)
    mask = np.zeros((n, width), dtype=bool)
    for i in range(n):
        block = topology.closed_neighborhood(i)
        dest[i, : len(block)] = block
        mask[i, : len(block)] = True
    return _BlockLayout(dest=dest, mask=mask, arcs=topology.closure_arcs())


def _inflow(layout: _BlockLayout, blocks: np.ndarray, n: int) -> np.ndarray:
    return np.bincount(layout.dest[layout.mask], weights=blocks[layout.mask], minlength=n)


def _blocks_from_map(layout: _BlockLayout, d: Dict[Arc, float]) -> np.ndarray:
    blocks = np.zeros(layout.mask.shape)
    blocks[layout.mask] = [max(0.0, float(d.get(arc, 0.0))) for arc in layout.arcs]
    return blocks


def _rescale_rows(blocks: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Fit a warm start to the current masses; empty rows restart at the self-loop"""
    sums = blocks.sum(axis=1)
    out = np.zeros_like(blocks)
    filled = sums > 0.0
    out[filled] = blocks[filled] * (x[filled] / sums[filled])[:, None]
    out[~filled, 0] = x[~filled]
    return out


def _kkt_residual(
    profile: PayoffProfile, layout: _BlockLayout, blocks: np.ndarray, z: np.ndarray
) -> float:
    """Largest complementary-slackness product d_ij * (best reachable level - u_j(z_j))"""
    levels = np.where(layout.mask, profile.densities(z)[layout.dest], -np.inf)
    best = levels.max(axis=1)
    gaps = np.where(layout.mask, best[:, None] - levels, 0.0)
    return float(np.max(blocks * gaps))


def _reallocation(
    profile: PayoffProfile,
    layout: _BlockLayout,
    blocks: np.ndarray,
    z: np.ndarray,
    iterations: int = 0,
    extra_residual: float = 0.0,
) -> Reallocation:
    return Reallocation(
        z=z,
        d={arc: float(v) for arc, v in zip(layout.arcs, blocks[layout.mask])},
        objective=profile.social_utility(z),
        kkt_residual=max(extra_residual, _kkt_residual(profile, layout, blocks, z)),
        iterations=iterations,
    )


def solve_p3(
    profile: PayoffProfile,
    topology: NetworkTopology,
    x: np.ndarray,
    warm_start: Optional[Reallocation] = None,
    tol: float = PG_TOL,
    max_iter: int = PG_MAX_ITER,
) -> Reallocation:
    """Projected gradient ascent of U(z(d)) over per-node scaled simplices.

    The gradient for d_ij is u_j(z_j); the step is 1/L with
    L = (max degree + 1) * max |u'|.
    """
    state = clean_state(x)
    n = topology.node_count
    layout = _layout(topology)
    step = 1.0 / (layout.width * profile.max_slope)

    if warm_start is not None:
        blocks = _rescale_rows(_blocks_from_map(layout, warm_start.d), state)
    else:
        blocks = np.zeros(layout.mask.shape)
        blocks[:, 0] = state

    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        z = _inflow(layout, blocks, n)
        grad = np.where(layout.mask, profile.densities(z)[layout.dest], 0.0)
        moved = project_block_simplices(blocks + step * grad, layout.mask, state)
        residual = float(np.max(np.abs(moved - blocks))) / step
        blocks = moved
        if residual <= tol:
            break
    else:
        if residual > PG_FAIL_TOL:
            raise SolverNonConvergenceError(
                f"Projected gradient stalled at residual {residual:.3e} after {max_iter} iterations"
            )
        logger.warning(
            f"Projected gradient hit {max_iter} iterations with residual {residual:.3e}"
        )

    z = _inflow(layout, blocks, n)
    return _reallocation(profile, layout, blocks, z, iterations, extra_residual=residual)


def z_star(profile: PayoffProfile, topology: NetworkTopology, x: np.ndarray) -> np.ndarray:
    return solve_p3(profile, topology, x).z


def _arc_flows(topology: NetworkTopology, realloc: Reallocation) -> FlowVector:
    return FlowVector(np.array([max(0.0, realloc.d.get(arc, 0.0)) for arc in topology.arcs]))


def nrpm_field(
    profile: PayoffProfile,
    topology: NetworkTopology,
    x: np.ndarray,
    warm_start: Optional[Reallocation] = None,
) -> FieldEvaluation:
    state = clean_state(x)
    realloc = solve_p3(profile, topology, state, warm_start=warm_start)
    return FieldEvaluation(delta=_arc_flows(topology, realloc), xdot=realloc.z - state)


def support_value(
    profile: PayoffProfile,
    topology: NetworkTopology,
    x: np.ndarray,
    pattern: SupportPattern,
) -> np.ndarray:
    """Closed-form node fractions F^M(x) induced by a support pattern"""
    state = clean_state(x)
    od = od_decompose(topology, pattern.arcs)
    out = np.zeros(topology.node_count)
    for origins, destinations in od.components:
        mass = float(sum(state[k] for k in origins))
        eta = profile.level_solve(destinations, mass)
        for j in destinations:
            out[j] = profile.inverse_density(j, eta).value
    return out


def verify_support_pattern(
    profile: PayoffProfile,
    topology: NetworkTopology,
    x: np.ndarray,
    realloc: Reallocation,
) -> bool:
    state = clean_state(x)
    pattern = SupportPattern.from_reallocation(realloc)
    od = od_decompose(topology, pattern.arcs)
    occupied = {i for i in range(topology.node_count) if state[i] > PATTERN_TOL}
    senders = {i for i, _ in pattern.arcs}
    if not occupied <= senders:
        return False
    if not occupied <= od.origins:
        return False
    try:
        value = support_value(profile, topology, state, pattern)
    except LevelSolveError:
        return False
    return float(np.max(np.abs(value - realloc.z))) <= SUPPORT_MATCH_TOL


def _pattern_flows(
    topology: NetworkTopology, x: np.ndarray, arcs: List[Arc], z: np.ndarray
) -> Optional[np.ndarray]:
    """Nonnegative flows on the given arcs with row sums x and inflows z, if any exist"""
    n = topology.node_count
    a_eq = np.zeros((2 * n, len(arcs)))
    for k, (i, j) in enumerate(arcs):
        a_eq[i, k] = 1.0
        a_eq[n + j, k] = 1.0
    b_eq = np.concatenate([x, z])
    result = optimize.linprog(
        np.zeros(len(arcs)), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs"
    )
    return result.x if result.status == 0 else None


def enumerate_supports_p3(
    profile: PayoffProfile, topology: NetworkTopology, x: np.ndarray
) -> Reallocation:
    """Exhaustive solve over support patterns, scoring each feasible F^M by U"""
    state = clean_state(x)
    layout = _layout(topology)
    closure = list(layout.arcs)
    if len(closure) > ENUMERATION_MAX_ARCS:
        raise OracleScaleError(
            f"{len(closure)} candidate arcs exceed the enumeration limit {ENUMERATION_MAX_ARCS}"
        )
    occupied = {i for i in range(topology.node_count) if state[i] > 0.0}

    best = None
    best_score = -np.inf
    for size in range(1, len(closure) + 1):
        for arcs in combinations(closure, size):
            if not occupied <= {i for i, _ in arcs}:
                continue
            pattern = SupportPattern(frozenset(arcs))
            try:
                value = support_value(profile, topology, state, pattern)
            except LevelSolveError:
                continue
            flows = _pattern_flows(topology, state, list(arcs), value)
            if flows is None:
                continue
            score = profile.social_utility(value)
            if score > best_score:
                best, best_score = (arcs, flows, value), score

    if best is None:
        raise SolverNonConvergenceError("No support pattern admits a feasible reallocation")
    arcs, flows, value = best
    d = dict(zip(arcs, flows))
    blocks = _blocks_from_map(layout, d)
    return _reallocation(profile, layout, blocks, value)


def _compositions(total: float, parts: int, step: float) -> Iterator[Tuple[float, ...]]:
    """Splits of total into parts; all but the last part are grid multiples"""
    if parts == 1:
        yield (total,)
        return
    k = 0
    while k * step <= total + 1e-12:
        head = k * step
        for tail in _compositions(max(total - head, 0.0), parts - 1, step):
            yield (head, *tail)
        k += 1


def brute_force_p3(
    profile: PayoffProfile,
    topology: NetworkTopology,
    x: np.ndarray,
    grid_step: float,
) -> Reallocation:
    """Grid search over per-node splits of x_i; desk-scale oracle"""
    if grid_step < BRUTE_FORCE_MIN_STEP:
        raise OracleScaleError(f"grid_step {grid_step} is below {BRUTE_FORCE_MIN_STEP}")
    state = clean_state(x)
    n = topology.node_count
    occupied = [i for i in range(n) if state[i] > 0.0]
    blocks_of = {i: topology.closed_neighborhood(i) for i in occupied}
    dimension = sum(len(b) for b in blocks_of.values())
    if dimension > BRUTE_FORCE_MAX_DIM:
        raise OracleScaleError(
            f"Search dimension {dimension} exceeds the limit {BRUTE_FORCE_MAX_DIM}"
        )

    options = [list(_compositions(float(state[i]), len(blocks_of[i]), grid_step)) for i in occupied]
    best = None
    best_score = -np.inf
    for choice in product(*options):
        z = np.zeros(n)
        for i, split in zip(occupied, choice):
            for j, v in zip(blocks_of[i], split):
                z[j] += v
        score = profile.social_utility(z)
        if score > best_score:
            best, best_score = (choice, z), score

    choice, z = best
    d = {arc: 0.0 for arc in topology.closure_arcs()}
    for i, split in zip(occupied, choice):
        for j, v in zip(blocks_of[i], split):
            d[(i, j)] = v
    layout = _layout(topology)
    return _reallocation(profile, layout, _blocks_from_map(layout, d), z)


class NetworkPayoffMaximization:
    kind = "nrpm"

    def __init__(
        self,
        profile: PayoffProfile,
        topology: NetworkTopology,
        tol: float = PG_TOL,
        max_iter: int = PG_MAX_ITER,
        logger: Optional[Logger] = None,
    ) -> None:
        self.profile = profile
        self.topology = topology
        self.tol = tol
        self.max_iter = max_iter
        self.last: Optional[Reallocation] = None
        self.logger = logger or logging.getLogger(__name__)
        self.logger.debug(
            f"Initialized NRPM field on {topology.node_count} nodes, "
            f"step 1/{(topology.max_degree + 1) * profile.max_slope:.4g}"
        )

    def solve(self, x: np.ndarray) -> Reallocation:
        try:
            realloc = solve_p3(
                self.profile, self.topology, x, self.last, tol=self.tol, max_iter=self.max_iter
            )
        except SolverNonConvergenceError as e:
            self.logger.error(f"Failed to solve reallocation at x={x}: {e}")
            raise
        self.last = realloc
        return realloc

    def reset(self) -> None:
        """Drop the warm start so the next solve does not depend on an earlier run"""
        self.last = None

    def field(self, x: np.ndarray) -> FieldEvaluation:
        state = clean_state(x)
        realloc = self.solve(state)
        return FieldEvaluation(delta=_arc_flows(self.topology, realloc), xdot=realloc.z - state)

    __call__ = field
