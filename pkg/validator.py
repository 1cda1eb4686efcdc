import logging
import os
import time
from dataclasses import dataclass, field
from logging import Logger
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from analysis.properties import (
    SUITES,
    PropertyInstance,
    PropertyResult,
    random_profile,
    random_topology,
)
from environment import random_state
from utils.errors import EXIT_OK, EXIT_PROPERTY_FAILURE, ConfigurationError, NetworkDynamicsError
from utils.output import write_summary_json

MIN_NODES = 3
MAX_NODES = 6


def case_rng(seed: int, case: int) -> np.random.Generator:
    """Counter-based generator, so every case replays from (seed, case) alone"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, case])))


def generate_case(
    seed: int,
    case: int,
    states_per_case: int = 6,
    integrator_h: float = 0.05,
    integrator_t_max: float = 200.0,
) -> PropertyInstance:
    rng = case_rng(seed, case)
    n = int(rng.integers(MIN_NODES, MAX_NODES + 1))
    topology = random_topology(rng, n)
    profile = random_profile(rng, n)
    states = [random_state(rng, n) for _ in range(states_per_case)]
    return PropertyInstance(
        topology=topology,
        profile=profile,
        states=states,
        rng=rng,
        integrator_h=integrator_h,
        integrator_t_max=integrator_t_max,
        notes={"seed": str(seed), "case": str(case)},
    )


@dataclass
class ValidationReport:
    seed: int
    results: List[tuple] = field(default_factory=list)

    @property
    def failures(self) -> List[tuple]:
        return [(case, r) for case, r in self.results if not r.passed]

    @property
    def passed(self) -> bool:
        return not self.failures

    def table(self) -> str:
        """One row per property with pass/fail counts over all cases"""
        counts = {}
        for _, r in self.results:
            key = (r.suite, r.name)
            ok, bad = counts.get(key, (0, 0))
            counts[key] = (ok + 1, bad) if r.passed else (ok, bad + 1)
        rows = [f"{'suite':<12} {'property':<34} {'pass':>5} {'fail':>5}  status"]
        for (suite, name), (ok, bad) in counts.items():
            rows.append(
                f"{suite:<12} {name:<34} {ok:>5} {bad:>5}  {'PASS' if bad == 0 else 'FAIL'}"
            )
        return "\n".join(rows)


class Validator:
    def __init__(
        self,
        seed: int,
        suites: Optional[Sequence[str]] = None,
        failure_dir: Optional[Path] = None,
        states_per_case: int = 6,
        integrator_h: float = 0.05,
        integrator_t_max: float = 200.0,
        logger: Optional[Logger] = None,
    ) -> None:
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigurationError(f"--seed: expected a nonnegative integer, got {seed!r}")
        selected = list(suites) if suites else list(SUITES)
        unknown = sorted(set(selected) - set(SUITES))
        if unknown:
            raise ConfigurationError(
                f"--suite: unknown suites {unknown}, choose from {list(SUITES)}"
            )
        self.seed = seed
        self.suites = selected
        self.failure_dir = Path(
            failure_dir or os.getenv("VALIDATE_FAILURE_DIR", "validation_failures")
        )
        self.states_per_case = states_per_case
        self.integrator_h = integrator_h
        self.integrator_t_max = integrator_t_max
        self.logger = logger or logging.getLogger(__name__)

        self.logger.info(f"Initialized validator with seed {seed}")
        self.logger.debug(f"Validator suites: {self.suites}, failures in {self.failure_dir}")

    def run_case(self, case: int) -> List[PropertyResult]:
        inst = generate_case(
            self.seed,
            case,
            states_per_case=self.states_per_case,
            integrator_h=self.integrator_h,
            integrator_t_max=self.integrator_t_max,
        )
        results = []
        for suite in self.suites:
            try:
                results.extend(SUITES[suite](inst))
            except (NetworkDynamicsError, ArithmeticError, ValueError) as e:
                self.logger.error(f"Failed to run suite {suite} on case {case}: {e}")
                results.append(
                    PropertyResult(suite, "raised", False, f"{type(e).__name__}: {e}")
                )
        failed = [r for r in results if not r.passed]
        if failed:
            self._write_failure(case, inst, failed)
        return results

    def _write_failure(
        self, case: int, inst: PropertyInstance, failed: Iterable[PropertyResult]
    ) -> None:
        payload = {
            "graph": inst.topology.to_dict(),
            "payoffs": inst.profile.to_list(),
            "x0": [float(v) for v in inst.states[0]],
            "seed": self.seed,
            "replay": f"validate --seed {self.seed} --case {case}",
            "states": [[float(v) for v in x] for x in inst.states],
            "failures": [
                {"suite": r.suite, "property": r.name, "detail": r.detail} for r in failed
            ],
        }
        path = self.failure_dir / f"seed{self.seed}_case{case}.json"
        try:
            write_summary_json(payload, path)
            self.logger.warning(f"Case {case} failed; instance written to {path}")
        except OSError as e:
            self.logger.error(f"Failed to write failing instance for case {case}: {e}")

    def run(self, cases: Iterable[int]) -> ValidationReport:
        report = ValidationReport(seed=self.seed)
        start = time.time()
        for case in cases:
            case_start = time.time()
            results = self.run_case(case)
            report.results.extend((case, r) for r in results)
            bad = sum(not r.passed for r in results)
            self.logger.info(
                f"Case {case}: {len(results) - bad}/{len(results)} properties passed "
                f"in {time.time() - case_start:.2f}s"
            )
        self.logger.info(
            f"Validation finished in {time.time() - start:.1f}s: "
            f"{len(report.failures)} failing checks"
        )
        return report


def run_validate(
    seed: int,
    cases: int,
    case: Optional[int] = None,
    suites: Optional[Sequence[str]] = None,
    failure_dir: Optional[Path] = None,
    logger: Optional[Logger] = None,
) -> tuple:
    """Run the property suites and return (exit code, report)"""
    if case is None and (isinstance(cases, bool) or not isinstance(cases, int) or cases < 1):
        raise ConfigurationError(f"--cases: expected a positive integer, got {cases!r}")
    if case is not None and case < 0:
        raise ConfigurationError(f"--case: expected a nonnegative integer, got {case!r}")
    validator = Validator(seed, suites=suites, failure_dir=failure_dir, logger=logger)
    indices = [case] if case is not None else range(cases)
    report = validator.run(indices)
    return (EXIT_OK if report.passed else EXIT_PROPERTY_FAILURE), report
