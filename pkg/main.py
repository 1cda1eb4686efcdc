import argparse
import os
import sys
import time
from logging import Logger
from typing import List, Optional

import numpy as np
from dotenv import load_dotenv

from analysis import (
    NASH_TOL,
    POST_RUN_SUPPORT_TOL,
    SUPPORT_TOL,
    global_waterfill_level,
    is_nash,
)
from dynamics import DYNAMICS_KINDS, solve_node_best_response, solve_p3
from environment import as_population_state, od_decompose
from simulator import Simulator, summary_fields
from utils import parse_node, parse_state, setup_logger
from utils.errors import (
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    ConfigurationError,
    NetworkDynamicsError,
    exit_code_for,
)
from utils.output import dump_json, write_summary_json, write_trajectory_csv
from utils.scenario import Scenario, load_scenario
from validator import run_validate

load_dotenv()


def _state_arg(args: argparse.Namespace, scenario: Scenario, logger: Logger) -> np.ndarray:
    values = parse_state(getattr(args, "state", None), logger)
    if values is None:
        return scenario.x0
    return as_population_state(values, scenario.topology.node_count)


def cmd_simulate(args: argparse.Namespace, logger: Logger) -> int:
    scenario = load_scenario(args.scenario)
    config = scenario.config.merged(
        {"dynamics": args.dynamics, "h": args.h, "t_max": args.t_max}
    )
    logger.info(
        f"Simulating {config.dynamics.upper()} on {scenario.topology.node_count} nodes, "
        f"{scenario.topology.arc_count} arcs, h={config.h}, t_max={config.t_max}"
    )

    simulator = Simulator(
        scenario.profile, scenario.topology, config, logger=logger, verbose=args.verbose
    )
    start = time.time()
    trajectory = simulator.simulate(scenario.x0)
    logger.info(f"Integrated {len(trajectory)} points in {time.time() - start:.2f}s")

    report = is_nash(
        scenario.profile,
        scenario.topology,
        trajectory.final_state,
        tol=float(os.getenv("NASH_TOL", str(NASH_TOL))),
        support_tol=float(os.getenv("NASH_SUPPORT_TOL", str(POST_RUN_SUPPORT_TOL))),
        strict=False,
    )
    summary = summary_fields(trajectory)
    summary["nash"] = {"is_nash": report.is_nash, "worst_violation": report.worst_violation}

    csv_path = write_trajectory_csv(
        trajectory, scenario.trajectory_path, scenario.topology.node_count
    )
    summary_path = write_summary_json(summary, scenario.summary_path)
    logger.info(f"Trajectory written to: {csv_path}")
    logger.info(f"Summary written to: {summary_path}")
    print(dump_json(summary))

    if trajectory.interrupted:
        logger.warning("Run interrupted before convergence")
    if not trajectory.converged:
        logger.warning(
            f"No convergence by t={trajectory.t_final:.4g}: "
            f"residual {trajectory.residuals[-1]:.3e} >= tol_eq {config.tol_eq}"
        )
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_best_response(args: argparse.Namespace, logger: Logger) -> int:
    scenario = load_scenario(args.scenario)
    x = _state_arg(args, scenario, logger)
    node = parse_node(args.node, scenario.topology.node_count, logger)
    br = solve_node_best_response(scenario.profile, scenario.topology, x, node)
    print(dump_json(br.to_dict()))
    return EXIT_OK


def cmd_nrpm_step(args: argparse.Namespace, logger: Logger) -> int:
    scenario = load_scenario(args.scenario)
    x = _state_arg(args, scenario, logger)
    realloc = solve_p3(scenario.profile, scenario.topology, x)
    logger.info(f"Solved the reallocation program in {realloc.iterations} iterations")
    pattern = [arc for arc, v in realloc.d.items() if v > 1e-9]
    od = od_decompose(scenario.topology, pattern)
    print(dump_json(realloc.to_dict(od)))
    return EXIT_OK


def cmd_check_ne(args: argparse.Namespace, logger: Logger) -> int:
    scenario = load_scenario(args.scenario)
    x = _state_arg(args, scenario, logger)
    tol = args.tol if args.tol is not None else float(os.getenv("NASH_TOL", str(NASH_TOL)))
    report = is_nash(scenario.profile, scenario.topology, x, tol=tol, support_tol=SUPPORT_TOL)
    print(dump_json(report.to_dict()))
    return EXIT_OK


def cmd_equilibria(args: argparse.Namespace, logger: Logger) -> int:
    scenario = load_scenario(args.scenario)
    x_star, level = global_waterfill_level(scenario.profile)
    report = is_nash(scenario.profile, scenario.topology, x_star, tol=1e-10)
    payload = {
        "x": [float(v) for v in x_star],
        "level": level,
        "U": scenario.profile.social_utility(x_star),
        "nash": report.to_dict(),
    }
    print(dump_json(payload))
    return EXIT_OK


def _validate_seed(args: argparse.Namespace) -> int:
    if args.seed is not None:
        return args.seed
    if args.scenario is not None:
        return load_scenario(args.scenario).seed
    raise ConfigurationError("--seed: required unless --scenario names a file with a seed")


def cmd_validate(args: argparse.Namespace, logger: Logger) -> int:
    seed = _validate_seed(args)
    code, report = run_validate(
        seed=seed,
        cases=args.cases,
        case=args.case,
        suites=args.suite,
        failure_dir=args.failure_dir,
        logger=logger,
    )
    print(report.table())
    if report.failures:
        print(f"\nFAILED: {len(report.failures)} checks (seed {seed})")
        for case, result in report.failures[:20]:
            print(f"  case {case} {result.suite}.{result.name}: {result.detail}")
    else:
        print(f"\nPASSED: {len(report.results)} checks (seed {seed})")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netdyn",
        description="Simulate and check stratified population dynamics on graphs",
    )
    parser.add_argument("--log-level", default=os.getenv("LOG_LEVEL", "INFO"))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a scenario and write trajectory + summary")
    p.add_argument("scenario")
    p.add_argument("--dynamics", choices=DYNAMICS_KINDS, default=None)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--t-max", dest="t_max", type=float, default=None)
    p.add_argument(
        "--verbose", action="store_true", help="log a progress line every log_every steps"
    )
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("best-response", help="one node's best response")
    p.add_argument("scenario")
    p.add_argument("--node", required=True, help="1-based node label")
    p.add_argument("--state", default=None, help="comma list or JSON array; defaults to x0")
    p.set_defaults(handler=cmd_best_response)

    p = sub.add_parser("nrpm-step", help="optimal one-hop reallocation at a state")
    p.add_argument("scenario")
    p.add_argument("--state", default=None)
    p.set_defaults(handler=cmd_nrpm_step)

    p = sub.add_parser("check-ne", help="Nash check at a state")
    p.add_argument("scenario")
    p.add_argument("--state", default=None)
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(handler=cmd_check_ne)

    p = sub.add_parser("equilibria", help="global waterfilling optimum and its Nash report")
    p.add_argument("scenario")
    p.set_defaults(handler=cmd_equilibria)

    p = sub.add_parser("validate", help="randomized property sweep")
    p.add_argument("--seed", type=int, default=None, help="defaults to the scenario's seed")
    p.add_argument("--scenario", default=None, help="scenario file whose seed to use")
    p.add_argument("--cases", type=int, default=50)
    p.add_argument("--case", type=int, default=None, help="replay a single case index")
    p.add_argument("--suite", action="append", default=None)
    p.add_argument("--failure-dir", dest="failure_dir", default=None)
    p.set_defaults(handler=cmd_validate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logger = setup_logger(
        "netdyn",
        log_level=args.log_level,
        log_to_file=os.getenv("LOG_TO_FILE", "False").lower() in ("1", "true", "yes"),
        log_dir=os.getenv("LOG_DIR", "logs"),
        stream=sys.stderr,
    )
    try:
        return args.handler(args, logger)
    except (NetworkDynamicsError, OSError, ValueError) as e:
        code = exit_code_for(e)
        logger.error(f"Failed to run {args.command}: {e}")
        return code


if __name__ == "__main__":
    sys.exit(main())
