"""Randomized property suites shared by ``main.py validate`` and the tests.

Each suite takes one ``PropertyInstance`` and returns a list of
``PropertyResult``; a result fails on its first counterexample and keeps
that counterexample in ``detail``.
"""

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Dict, List, Sequence

import numpy as np

from analysis.equilibrium import (
    NASH_TOL,
    POST_RUN_SUPPORT_TOL,
    check_spc,
    global_waterfill,
    global_waterfill_level,
    is_nash,
    is_refinement_nash,
)
from dynamics import (
    Reallocation,
    enumerate_supports_p2,
    nbrd_field,
    resolve_p2_projected,
    solve_node_best_response,
    solve_p3,
    ssd_field,
    ssd_outflow,
    ssd_outflow_quadrature,
    verify_kkt_p2,
    verify_support_pattern,
)
from environment import (
    FlowVector,
    InverseRange,
    LogPayoff,
    NetworkTopology,
    PayoffProfile,
    QuadraticPayoff,
    apply_incidence,
    build_topology,
    od_decompose,
    random_state,
    support_flow_graph,
)
from simulator import SimulationConfig, Trajectory, dissipation, simulate, utility_rate

ANALYTIC_TOL = 1e-8
FIELD_ZERO_TOL = 1e-10
SPC_TOL = 1e-12
# SSD flow between occupied neighbours is quadratic in their density gap, so
# the gap closes like 1/t. A node draining into a better empty neighbour
# loses mass like exp(-gap * t) and needs gap * t >= 15 to fall under the
# post-run support threshold.
SSD_GAP_SCALE = 15.0
PERTURBATION = 1e-3


@dataclass(frozen=True)
class PropertyResult:
    suite: str
    name: str
    passed: bool
    detail: str = ""


@dataclass
class PropertyInstance:
    topology: NetworkTopology
    profile: PayoffProfile
    states: List[np.ndarray]
    rng: np.random.Generator
    integrator_h: float = 0.05
    integrator_t_max: float = 200.0
    notes: Dict[str, str] = field(default_factory=dict)


class _Collector:
    def __init__(self, suite: str) -> None:
        self.suite = suite
        self.results: List[PropertyResult] = []

    def check(self, name: str, failures: Sequence[str]) -> None:
        failures = list(failures)
        detail = failures[0] if failures else ""
        if len(failures) > 1:
            detail += f" (+{len(failures) - 1} more)"
        self.results.append(PropertyResult(self.suite, name, not failures, detail))


def random_topology(
    rng: np.random.Generator, node_count: int, extra_edge_prob: float = 0.35
) -> NetworkTopology:
    """Random spanning tree plus independent extra edges, on shuffled labels"""
    labels = rng.permutation(node_count) + 1
    edges = set()
    for k in range(1, node_count):
        parent = int(rng.integers(k))
        a, b = int(labels[k]), int(labels[parent])
        edges.add((min(a, b), max(a, b)))
    for a, b in combinations(range(1, node_count + 1), 2):
        if (a, b) not in edges and rng.random() < extra_edge_prob:
            edges.add((a, b))
    return build_topology(node_count, sorted(edges))


def random_profile(rng: np.random.Generator, node_count: int) -> PayoffProfile:
    functions = []
    for _ in range(node_count):
        if rng.random() < 0.5:
            functions.append(
                QuadraticPayoff(a=float(rng.uniform(0.0, 3.0)), c=float(rng.uniform(0.5, 2.0)))
            )
        else:
            functions.append(
                LogPayoff(w=float(rng.uniform(0.5, 2.0)), s=float(rng.uniform(0.5, 1.5)))
            )
    return PayoffProfile(tuple(functions))


def _fmt(x: np.ndarray) -> str:
    return "[" + ", ".join(f"{v:.6g}" for v in x) + "]"


def graph_suite(inst: PropertyInstance) -> List[PropertyResult]:
    top, rng = inst.topology, inst.rng
    out = _Collector("graph")

    failures = []
    for _ in range(20):
        delta = FlowVector(rng.random(top.arc_count))
        total = float(np.sum(apply_incidence(top, delta)))
        if abs(total) > 1e-12:
            failures.append(f"incidence sum {total:.3e}")
    out.check("incidence_conserves_mass", failures)

    failures = []
    matrix = top.incidence_matrix().toarray()
    for m, (i, j) in enumerate(top.arcs):
        column = matrix[:, m]
        expected = np.zeros(top.node_count)
        expected[i], expected[j] = -1.0, 1.0
        if not np.array_equal(column, expected):
            failures.append(f"column for arc ({i + 1}, {j + 1})")
    out.check("incidence_columns", failures)

    failures = []
    closure = top.closure_arcs()
    for _ in range(10):
        pattern = [arc for arc in closure if rng.random() < 0.4]
        od = od_decompose(top, pattern)
        origins = [k for o, _ in od.components for k in o]
        destinations = [k for _, d in od.components for k in d]
        if len(origins) != len(set(origins)) or len(destinations) != len(set(destinations)):
            failures.append(f"overlapping components for pattern {pattern}")
        if not {i for i, _ in pattern} <= set(origins):
            failures.append(f"sender outside origins for pattern {pattern}")
        if od.uncovered_destinations != frozenset(range(top.node_count)) - {j for _, j in pattern}:
            failures.append(f"uncovered set mismatch for pattern {pattern}")
    out.check("od_partition", failures)
    return out.results


def payoff_suite(inst: PropertyInstance) -> List[PropertyResult]:
    profile, rng = inst.profile, inst.rng
    out = _Collector("payoff")

    failures = []
    for k, f in enumerate(profile.functions):
        pairs = np.sort(rng.random((1000, 2)), axis=1)
        for y1, y2 in pairs:
            if y1 < y2 and not f.density(y1) > f.density(y2):
                failures.append(f"node {k + 1}: u({y1}) <= u({y2})")
                break
    out.check("density_strictly_decreasing", failures)

    failures = []
    for k, f in enumerate(profile.functions):
        for y in rng.random(50):
            inv = f.inverse_density(f.density(y))
            if inv.flag is InverseRange.WITHIN and abs(inv.value - y) > 1e-10:
                failures.append(f"node {k + 1}: inverse(u({y})) = {inv.value}")
    out.check("inverse_round_trip", failures)

    failures = []
    n = profile.node_count
    for _ in range(20):
        size = int(rng.integers(1, n + 1))
        nodes = sorted(rng.choice(n, size=size, replace=False).tolist())
        m1, m2 = np.sort(rng.uniform(0.0, min(size, 1.0), size=2))
        if m2 - m1 < 1e-6:
            continue
        eta1, eta2 = profile.level_solve(nodes, m1), profile.level_solve(nodes, m2)
        if not eta1 > eta2:
            failures.append(f"nodes {nodes}: level({m1}) = {eta1} <= level({m2}) = {eta2}")
    out.check("level_solve_monotone", failures)

    failures = []
    for k, f in enumerate(profile.functions):
        bound = 1.0
        if isinstance(f, LogPayoff):
            bound = 2.0 * f.w / f.s**3
        for y in rng.uniform(0.01, 0.99, 10):
            for h in (1e-3, 1e-4):
                fd = (f.cumulative(y + h) - f.cumulative(y - h)) / (2 * h)
                if abs(fd - f.density(y)) > bound * h * h + 1e-9:
                    failures.append(f"node {k + 1}: finite difference off at y={y}, h={h}")
    out.check("finite_difference", failures)

    failures = []
    for _ in range(100):
        x, y = random_state(rng, n, 0.0), random_state(rng, n, 0.0)
        if np.max(np.abs(x - y)) < 1e-3:
            continue
        mid = profile.social_utility(0.5 * (x + y))
        chord = 0.5 * (profile.social_utility(x) + profile.social_utility(y))
        if not mid > chord:
            failures.append(f"U not strictly concave between {_fmt(x)} and {_fmt(y)}")
    out.check("utility_strictly_concave", failures)
    return out.results


def restricted_optima(inst: PropertyInstance, count: int = 4) -> List[np.ndarray]:
    """Utility maximizers over random node subsets, the full set included.

    Each is Nash exactly when no empty neighbour of its support sits above
    the common level, so the batch mixes Nash and non-Nash states.
    """
    profile, n = inst.profile, inst.profile.node_count
    states = [global_waterfill(profile)]
    for _ in range(count):
        size = int(inst.rng.integers(1, n + 1))
        members = sorted(inst.rng.choice(n, size=size, replace=False).tolist())
        sub = PayoffProfile(tuple(profile.functions[k] for k in members))
        x = np.zeros(n)
        x[members] = global_waterfill_level(sub)[0]
        states.append(x)
    return states


def perturbed_nash_states(inst: PropertyInstance, x_star: np.ndarray) -> List[np.ndarray]:
    """Shift PERTURBATION mass from an occupied node of a Nash state to a neighbour.

    The receiving node is either occupied at the same level or empty and
    strictly worse, so every returned state has an occupied node below a
    neighbour.
    """
    profile, top = inst.profile, inst.topology
    u = profile.densities(x_star)
    states = []
    for i in np.flatnonzero(x_star > 2 * PERTURBATION):
        for j in top.neighbors[i]:
            if x_star[j] > 0.0 or profile.density(j, 0.0) < u[i] - 1e-4:
                x = x_star.copy()
                x[i] -= PERTURBATION
                x[j] += PERTURBATION
                states.append(x)
    return states


def _field_zero_matches_nash(
    inst: PropertyInstance,
    field_fn: Callable[[np.ndarray], np.ndarray],
) -> List[str]:
    optimum = global_waterfill(inst.profile)
    failures = []
    for x in [*inst.states, *restricted_optima(inst), *perturbed_nash_states(inst, optimum)]:
        residual = float(np.max(np.abs(field_fn(x))))
        nash = is_nash(inst.profile, inst.topology, x, ANALYTIC_TOL).is_nash
        if (residual <= FIELD_ZERO_TOL) != nash:
            failures.append(f"x={_fmt(x)}: residual {residual:.3e}, is_nash {nash}")
    return failures


def _perturbations_rejected(
    inst: PropertyInstance, field_fn: Callable[[np.ndarray], np.ndarray]
) -> List[str]:
    failures = []
    for x in perturbed_nash_states(inst, global_waterfill(inst.profile)):
        residual = float(np.max(np.abs(field_fn(x))))
        if is_nash(inst.profile, inst.topology, x, ANALYTIC_TOL).is_nash:
            failures.append(f"x={_fmt(x)}: perturbed state accepted as Nash")
        if residual <= FIELD_ZERO_TOL:
            failures.append(f"x={_fmt(x)}: perturbed state is a rest point")
    return failures


def convergence_failures(
    profile: PayoffProfile,
    topology: NetworkTopology,
    trajectory: Trajectory,
    kind: str,
) -> List[str]:
    """End-of-run check for one trajectory, empty when it settled on a Nash point.

    NBRD and NRPM must reach the residual tolerance and pass a 1e-6 Nash
    check. SSD must end within SSD_GAP_SCALE / t of Nash, and an unfinished
    SSD run must still be shrinking its residual over the second half.
    """
    failures = []
    t_final = max(trajectory.t_final, 1.0)
    tol = max(NASH_TOL, SSD_GAP_SCALE / t_final) if kind == "ssd" else NASH_TOL
    report = is_nash(
        profile,
        topology,
        trajectory.final_state,
        tol=tol,
        support_tol=POST_RUN_SUPPORT_TOL,
        strict=False,
    )
    if not report.is_nash:
        failures.append(f"violation {report.worst_violation:.3e} above {tol:.3e}")
    if trajectory.converged:
        return failures
    if kind != "ssd":
        failures.append(f"residual {trajectory.residuals[-1]:.3e} at t={trajectory.t_final}")
        return failures
    halfway = trajectory.residuals[len(trajectory) // 2]
    if trajectory.residuals[-1] > halfway + 1e-12:
        failures.append(
            f"residual grew from {halfway:.3e} to {trajectory.residuals[-1]:.3e} "
            "over the second half"
        )
    return failures


def ssd_suite(inst: PropertyInstance) -> List[PropertyResult]:
    profile, top, rng = inst.profile, inst.topology, inst.rng
    out = _Collector("ssd")
    evaluations = [(x, ssd_field(profile, top, x)) for x in inst.states]

    out.check(
        "strong_positive_correlation",
        [
            f"x={_fmt(x)}: flow on {check.violations}"
            for x, ev in evaluations
            if not (check := check_spc(profile, top, x, ev.delta, SPC_TOL)).holds
        ],
    )

    failures = []
    for x in inst.states[:5]:
        for m in rng.choice(top.arc_count, size=min(4, top.arc_count), replace=False):
            arc = top.arcs[int(m)]
            closed = ssd_outflow(profile, top, x, arc)
            quad = ssd_outflow_quadrature(profile, top, x, arc)
            if abs(closed - quad) > 1e-8:
                failures.append(f"x={_fmt(x)} arc {arc}: {closed} vs {quad}")
    out.check("quadrature_equivalence", failures)

    def ssd_xdot(x: np.ndarray) -> np.ndarray:
        return ssd_field(profile, top, x).xdot

    out.check("equilibria_are_nash", _field_zero_matches_nash(inst, ssd_xdot))
    out.check("perturbed_nash_rejected", _perturbations_rejected(inst, ssd_xdot))
    out.check(
        "acyclic_support",
        [
            f"x={_fmt(x)}: cyclic flow support"
            for x, ev in evaluations
            if not support_flow_graph(top, ev.delta).acyclic
        ],
    )
    return out.results


def nbrd_suite(inst: PropertyInstance) -> List[PropertyResult]:
    profile, top, rng = inst.profile, inst.topology, inst.rng
    out = _Collector("nbrd")
    n = top.node_count
    evaluations = [(x, nbrd_field(profile, top, x)) for x in inst.states]

    out.check(
        "strong_positive_correlation",
        [
            f"x={_fmt(x)}: flow on {check.violations}"
            for x, ev in evaluations
            if not (check := check_spc(profile, top, x, ev.delta, SPC_TOL)).holds
        ],
    )

    oracle_failures, kkt_failures = [], []
    for x in inst.states:
        for i in range(n):
            br = solve_node_best_response(profile, top, x, i)
            residual = verify_kkt_p2(profile, top, x, i, br)
            if residual > ANALYTIC_TOL:
                kkt_failures.append(f"x={_fmt(x)} node {i + 1}: KKT residual {residual:.3e}")
            oracle = enumerate_supports_p2(profile, top, x, i)
            gap = max(abs(br.d[j] - oracle.d[j]) for j in br.d)
            if gap > 1e-9:
                oracle_failures.append(f"x={_fmt(x)} node {i + 1}: oracle gap {gap:.3e}")
    out.check("kkt_residual", kkt_failures)
    out.check("greedy_matches_oracle", oracle_failures)

    failures = []
    for x in inst.states[:2]:
        i = int(np.argmax(x))
        br = solve_node_best_response(profile, top, x, i)
        for _ in range(3):
            start = rng.random(len(top.closed_neighborhood(i)))
            resolved = resolve_p2_projected(profile, top, x, i, start)
            gap = max(abs(br.d[j] - resolved.d[j]) for j in br.d)
            if gap > 1e-7:
                failures.append(f"x={_fmt(x)} node {i + 1}: projected resolve differs by {gap:.3e}")
    out.check("unique_best_response", failures)

    def nbrd_xdot(x: np.ndarray) -> np.ndarray:
        return nbrd_field(profile, top, x).xdot

    out.check("equilibria_are_nash", _field_zero_matches_nash(inst, nbrd_xdot))
    out.check("perturbed_nash_rejected", _perturbations_rejected(inst, nbrd_xdot))
    out.check(
        "acyclic_support",
        [
            f"x={_fmt(x)}: cyclic flow support"
            for x, ev in evaluations
            if not support_flow_graph(top, ev.delta).acyclic
        ],
    )
    return out.results


def _random_warm_start(rng: np.random.Generator, top: NetworkTopology) -> Reallocation:
    d = {arc: float(rng.random()) for arc in top.closure_arcs()}
    return Reallocation(z=np.zeros(top.node_count), d=d, objective=0.0, kkt_residual=0.0)


def nrpm_suite(inst: PropertyInstance) -> List[PropertyResult]:
    profile, top, rng = inst.profile, inst.topology, inst.rng
    out = _Collector("nrpm")
    solved = [(x, solve_p3(profile, top, x)) for x in inst.states]

    out.check(
        "utility_ascent",
        [
            f"x={_fmt(x)}: U(z*) = {r.objective} < U(x)"
            for x, r in solved
            if r.objective < profile.social_utility(x) - 1e-12
        ],
    )

    failures = []
    for x, r in solved:
        for i in range(top.node_count):
            sent = sum(r.d[(i, j)] for j in top.closed_neighborhood(i))
            if abs(sent - x[i]) > 1e-10:
                failures.append(f"x={_fmt(x)} node {i + 1}: sends {sent}, holds {x[i]}")
        if abs(float(np.sum(r.z)) - 1.0) > 1e-9:
            failures.append(f"x={_fmt(x)}: z sums to {np.sum(r.z)}")
    out.check("feasible_reallocation", failures)

    failures = []
    for x, r in solved[:3]:
        for _ in range(2):
            other = solve_p3(profile, top, x, warm_start=_random_warm_start(rng, top))
            gap = float(np.max(np.abs(other.z - r.z)))
            if gap > 1e-6:
                failures.append(f"x={_fmt(x)}: z* differs by {gap:.3e} across warm starts")
    out.check("unique_node_fractions", failures)

    order_failures, level_failures = [], []
    for x, r in solved:
        u = profile.densities(r.z)
        for (i, j), v in r.d.items():
            if i != j and v > 1e-7 and u[j] < u[i] - 1e-6:
                order_failures.append(f"x={_fmt(x)}: arc ({i + 1}, {j + 1}) flows downhill")
        for i in range(top.node_count):
            levels = [u[j] for j in top.closed_neighborhood(i) if r.d[(i, j)] > 1e-9]
            if levels and max(levels) - min(levels) > 1e-7:
                level_failures.append(f"x={_fmt(x)} node {i + 1}: levels spread {levels}")
    out.check("destination_ordering", order_failures)
    out.check("shared_sender_level", level_failures)

    out.check(
        "kkt_residual",
        [
            f"x={_fmt(x)}: residual {r.kkt_residual:.3e}"
            for x, r in solved
            if r.kkt_residual > ANALYTIC_TOL
        ],
    )
    out.check(
        "support_pattern",
        [f"x={_fmt(x)}" for x, r in solved if not verify_support_pattern(profile, top, x, r)],
    )
    def nrpm_xdot(x: np.ndarray) -> np.ndarray:
        return solve_p3(profile, top, x).z - x

    out.check("equilibria_are_nash", _field_zero_matches_nash(inst, nrpm_xdot))
    out.check("perturbed_nash_rejected", _perturbations_rejected(inst, nrpm_xdot))
    return out.results


def integrator_suite(inst: PropertyInstance) -> List[PropertyResult]:
    profile, top = inst.profile, inst.topology
    out = _Collector("integrator")
    x0 = inst.states[0]

    for kind in ("ssd", "nbrd", "nrpm"):
        cfg = SimulationConfig(
            dynamics=kind,
            h=inst.integrator_h,
            t_max=inst.integrator_t_max,
            log_every=0,
            kkt_check_every=1,
        )
        traj = simulate(profile, top, x0, cfg)
        states = np.array(traj.states)

        out.check(
            f"{kind}_simplex_invariance",
            [
                f"t={t}: sum {np.sum(x)}, min {np.min(x)}"
                for t, x in zip(traj.times, states)
                if abs(np.sum(x) - 1.0) > 1e-9 or np.min(x) < -1e-10
            ],
        )
        drops = np.diff(traj.utilities)
        out.check(
            f"{kind}_monotone_utility",
            [f"step {k}: U dropped by {-d:.3e}" for k, d in enumerate(drops) if d < -1e-9],
        )
        if kind != "nrpm":
            out.check(
                f"{kind}_dissipation_sign",
                [
                    f"t={t}: dissipation {v:.3e}"
                    for t, v in zip(traj.times, traj.dissipations)
                    if v > 1e-12
                ],
            )

        out.check(f"{kind}_convergence", convergence_failures(profile, top, traj, kind))

    failures = []
    for x in inst.states:
        for fn in (ssd_field, nbrd_field):
            ev = fn(profile, top, x)
            arc_form = dissipation(profile, top, x, ev.delta)
            node_form = utility_rate(profile, x, ev.xdot)
            if abs(arc_form + node_form) > 1e-12 * max(1.0, abs(arc_form)):
                failures.append(f"x={_fmt(x)}: {arc_form} vs {-node_form}")
    out.check("dissipation_readings_agree", failures)
    return out.results


def analysis_suite(inst: PropertyInstance) -> List[PropertyResult]:
    profile, top, rng = inst.profile, inst.topology, inst.rng
    out = _Collector("analysis")
    optimum = global_waterfill(profile)

    report = is_nash(profile, top, optimum, tol=1e-10)
    out.check(
        "global_optimum_is_nash",
        [] if report.is_nash else [f"x*={_fmt(optimum)} violates by {report.worst_violation:.3e}"],
    )

    best = profile.social_utility(optimum)
    failures = []
    for _ in range(2000):
        x = random_state(rng, top.node_count)
        if profile.social_utility(x) > best + 1e-12:
            failures.append(f"x={_fmt(x)} beats the waterfill optimum")
    out.check("global_optimality", failures)

    missing = [
        (i, j)
        for i, j in combinations(range(top.node_count), 2)
        if (i, j) not in set(top.edges)
    ]
    failures = []
    if missing:
        extra = missing[int(rng.integers(len(missing)))]
        fine = build_topology(
            top.node_count, [(i + 1, j + 1) for i, j in [*top.edges, extra]]
        )
        for x in [*inst.states, optimum]:
            if not is_refinement_nash(profile, top, fine, x):
                failures.append(f"x={_fmt(x)} Nash on the refined graph only")
    out.check("refinement_shrinks_nash_set", failures)
    return out.results


SUITES: Dict[str, Callable[[PropertyInstance], List[PropertyResult]]] = {
    "graph": graph_suite,
    "payoff": payoff_suite,
    "ssd": ssd_suite,
    "nbrd": nbrd_suite,
    "nrpm": nrpm_suite,
    "integrator": integrator_suite,
    "analysis": analysis_suite,
}
