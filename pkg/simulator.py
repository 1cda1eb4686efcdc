import logging
import os
import signal
import threading
from dataclasses import dataclass, field, fields, replace
from types import FrameType
from typing import Any, Callable, Dict, Iterator, List, Mapping, Optional

import numpy as np

from dynamics import DYNAMICS_KINDS, FieldEvaluation, build_dynamics
from environment import (
    FlowVector,
    NetworkTopology,
    PayoffProfile,
    as_population_state,
)
from utils import log_step_details
from utils.errors import ConfigurationError, IntegrationError

MONOTONE_SLACK = 1e-9


@dataclass(frozen=True)
class SimulationConfig:
    dynamics: str = "ssd"
    h: float = 0.01
    t_max: float = 200.0
    tol_eq: float = 1e-8
    clamp_tol: float = 1e-10
    log_every: int = 500
    kkt_check_every: int = 100

    def __post_init__(self) -> None:
        kind = str(self.dynamics).lower()
        if kind not in DYNAMICS_KINDS:
            raise ConfigurationError(f"dynamics: unsupported kind {self.dynamics!r}")
        object.__setattr__(self, "dynamics", kind)
        if not self.h > 0:
            raise ConfigurationError(f"h: step must be positive, got {self.h}")
        if not self.t_max >= self.h:
            raise ConfigurationError(f"t_max: {self.t_max} is shorter than one step {self.h}")
        if not (self.tol_eq > 0 and self.clamp_tol > 0):
            raise ConfigurationError("tol_eq and clamp_tol must be positive")
        if self.log_every < 0 or self.kkt_check_every < 0:
            raise ConfigurationError("log_every and kkt_check_every must be nonnegative")

    @classmethod
    def from_env(cls, **overrides: Any) -> "SimulationConfig":
        base = {
            "dynamics": os.getenv("SIM_DYNAMICS", "ssd"),
            "h": float(os.getenv("SIM_STEP", "0.01")),
            "t_max": float(os.getenv("SIM_T_MAX", "200")),
            "tol_eq": float(os.getenv("SIM_TOL_EQ", "1e-8")),
            "clamp_tol": float(os.getenv("SIM_CLAMP_TOL", "1e-10")),
            "log_every": int(os.getenv("SIM_LOG_EVERY", "500")),
            "kkt_check_every": int(os.getenv("NBRD_KKT_CHECK_EVERY", "100")),
        }
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**base)

    def merged(self, overrides: Mapping[str, Any]) -> "SimulationConfig":
        known = {f.name for f in fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ConfigurationError(f"unknown keys {unknown}")
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


@dataclass
class Trajectory:
    times: List[float] = field(default_factory=list)
    states: List[np.ndarray] = field(default_factory=list)
    utilities: List[float] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)
    dissipations: List[float] = field(default_factory=list)
    converged: bool = False
    interrupted: bool = False
    utility_violations: int = 0

    def record(
        self, t: float, x: np.ndarray, utility: float, residual: float, dissipation: float
    ) -> None:
        self.times.append(t)
        self.states.append(x.copy())
        self.utilities.append(utility)
        self.residuals.append(residual)
        self.dissipations.append(dissipation)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def t_final(self) -> float:
        return self.times[-1]

    def __len__(self) -> int:
        return len(self.times)

    def as_rows(self) -> Iterator[List[float]]:
        for t, x, u, r, v in zip(
            self.times, self.states, self.utilities, self.residuals, self.dissipations
        ):
            yield [t, *x.tolist(), u, r, v]


def dissipation(
    profile: PayoffProfile, topology: NetworkTopology, x: np.ndarray, delta: FlowVector
) -> float:
    """Arc-wise rate of -U: sum of delta_ij * (u_i(x_i) - u_j(x_j))"""
    u = profile.densities(x)
    return float(np.dot(delta.values, u[topology.sources] - u[topology.targets]))


def utility_rate(profile: PayoffProfile, x: np.ndarray, xdot: np.ndarray) -> float:
    """Node-wise rate of U: sum of u_i(x_i) * xdot_i"""
    return float(np.dot(profile.densities(x), xdot))


def step_rk4(
    field: Callable[[np.ndarray], FieldEvaluation],
    x: np.ndarray,
    h: float,
    clamp_tol: float = 1e-10,
    k1: Optional[np.ndarray] = None,
) -> np.ndarray:
    """One classical Runge-Kutta step followed by clamping and renormalization"""
    if k1 is None:
        k1 = field(x).xdot
    k2 = field(x + 0.5 * h * k1).xdot
    k3 = field(x + 0.5 * h * k2).xdot
    k4 = field(x + h * k3).xdot
    nxt = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    drift = abs(float(np.sum(nxt)) - float(np.sum(x)))
    if drift > 1e-12 * h + 8 * np.finfo(float).eps:
        raise IntegrationError(
            f"Mass drift {drift:.3e} in one step of size {h}; the field does not conserve mass"
        )

    lowest = float(np.min(nxt))
    if lowest < -clamp_tol:
        raise IntegrationError(
            f"Component fell to {lowest:.3e} below -{clamp_tol}; reduce the step size h={h}"
        )
    nxt = np.where(nxt < 0.0, 0.0, nxt)
    return nxt / np.sum(nxt)


class Simulator:
    def __init__(
        self,
        profile: PayoffProfile,
        topology: NetworkTopology,
        config: SimulationConfig,
        logger: Optional[logging.Logger] = None,
        verbose: bool = False,
    ) -> None:
        self.profile = profile
        self.topology = topology
        self.config = config
        self.verbose = verbose
        self.logger = logger or logging.getLogger(__name__)
        self.field = build_dynamics(
            config.dynamics,
            profile,
            topology,
            kkt_check_every=config.kkt_check_every,
            logger=self.logger,
        )
        self._interrupted = False
        self._old_sigint = None
        self._old_sigterm = None
        self.logger.info(f"Initialized {config.dynamics.upper()} simulator")
        self.logger.debug(f"Simulation config: {config}")

    def _signal_handler(self, signum: int, frame: Optional[FrameType]) -> None:
        self.logger.warning(f"Signal {signum} received. Stopping after the current step...")
        self._interrupted = True

    def _install_signal_handlers(self) -> bool:
        if threading.current_thread() is not threading.main_thread():
            return False
        self._old_sigint = signal.getsignal(signal.SIGINT)
        self._old_sigterm = signal.getsignal(signal.SIGTERM)
        signal.signal(signal.SIGINT, self._signal_handler)
        signal.signal(signal.SIGTERM, self._signal_handler)
        return True

    def _restore_signal_handlers(self) -> None:
        if self._old_sigint is not None:
            signal.signal(signal.SIGINT, self._old_sigint)
        if self._old_sigterm is not None:
            signal.signal(signal.SIGTERM, self._old_sigterm)
        self._old_sigint = self._old_sigterm = None

    def simulate(self, x0: np.ndarray) -> Trajectory:
        cfg = self.config
        x = as_population_state(x0, self.topology.node_count)
        trajectory = Trajectory()
        self.field.reset()
        self._interrupted = False
        installed = self._install_signal_handlers()

        step = 0
        try:
            while True:
                t = step * cfg.h
                evaluation = self.field(x)
                residual = float(np.max(np.abs(evaluation.xdot)))
                utility = self.profile.social_utility(x)
                rate = dissipation(self.profile, self.topology, x, evaluation.delta)

                if trajectory.utilities and utility < trajectory.utilities[-1] - MONOTONE_SLACK:
                    trajectory.utility_violations += 1
                    self.logger.warning(
                        f"Utility dropped from {trajectory.utilities[-1]} to {utility} at t={t}"
                    )
                trajectory.record(t, x, utility, residual, rate)

                if cfg.log_every and step % cfg.log_every == 0:
                    log_step_details(
                        {
                            "step": step,
                            "t": t,
                            "x": x.tolist(),
                            "utility": utility,
                            "residual": residual,
                            "dissipation": rate,
                        },
                        verbose=self.verbose,
                        logger=self.logger,
                    )

                if residual < cfg.tol_eq:
                    trajectory.converged = True
                    break
                if t >= cfg.t_max - 1e-9 * cfg.h:
                    break
                if self._interrupted:
                    trajectory.interrupted = True
                    break

                x = step_rk4(self.field, x, cfg.h, cfg.clamp_tol, k1=evaluation.xdot)
                step += 1
        except IntegrationError as e:
            self.logger.error(f"Failed to integrate at t={step * cfg.h}: {e}")
            raise
        finally:
            if installed:
                self._restore_signal_handlers()

        self.logger.info(
            f"{cfg.dynamics.upper()} run finished: converged={trajectory.converged}, "
            f"t={trajectory.t_final:.4g}, residual={trajectory.residuals[-1]:.3e}, "
            f"U={trajectory.utilities[-1]:.10g}"
        )
        return trajectory


def simulate(
    profile: PayoffProfile,
    topology: NetworkTopology,
    x0: np.ndarray,
    config: SimulationConfig,
    logger: Optional[logging.Logger] = None,
) -> Trajectory:
    return Simulator(profile, topology, config, logger=logger).simulate(x0)


def summary_fields(trajectory: Trajectory) -> Dict[str, Any]:
    return {
        "converged": trajectory.converged,
        "t_final": float(trajectory.t_final),
        "x_final": [float(v) for v in trajectory.final_state],
        "U_final": float(trajectory.utilities[-1]),
    }
