import logging
from logging import Logger
from typing import Optional

import numpy as np
from scipy import integrate

from dynamics.base import FieldEvaluation
from environment import (
    Arc,
    FlowVector,
    NetworkTopology,
    PayoffProfile,
    apply_incidence,
    clean_state,
)
from utils.errors import TopologyError


def _require_arc(topology: NetworkTopology, arc: Arc) -> None:
    if not topology.has_arc(arc):
        raise TopologyError(f"({arc[0] + 1}, {arc[1] + 1}) is not an arc of the graph")


def ssd_outflow(
    profile: PayoffProfile, topology: NetworkTopology, x: np.ndarray, arc: Arc
) -> float:
    """Closed-form stratified Smith outflow along arc (i, j).

    Strata of node i whose density is below the newest stratum of j, i.e.
    y in [y_ij, x_i], move at a rate equal to the density gap.
    """
    _require_arc(topology, arc)
    i, j = arc
    xi = float(x[i])
    if xi <= 0.0:
        return 0.0
    target = profile.density(j, x[j])
    y = min(profile.inverse_density(i, target).value, xi)
    gain = target * (xi - y) - (profile.cumulative(i, xi) - profile.cumulative(i, y))
    return max(0.0, gain)


def ssd_outflow_quadrature(
    profile: PayoffProfile, topology: NetworkTopology, x: np.ndarray, arc: Arc
) -> float:
    """Same outflow by adaptive quadrature of the positive density gap over [0, x_i]"""
    _require_arc(topology, arc)
    i, j = arc
    xi = float(x[i])
    if xi <= 0.0:
        return 0.0
    target = profile.density(j, x[j])
    kink = min(profile.inverse_density(i, target).value, xi)
    points = [kink] if 0.0 < kink < xi else None
    value, _ = integrate.quad(
        lambda y: max(0.0, target - profile.density(i, y)),
        0.0,
        xi,
        points=points,
        epsabs=1e-13,
        epsrel=1e-12,
        limit=200,
    )
    return float(value)


def ssd_field(
    profile: PayoffProfile, topology: NetworkTopology, x: np.ndarray
) -> FieldEvaluation:
    state = clean_state(x)
    values = np.array([ssd_outflow(profile, topology, state, arc) for arc in topology.arcs])
    delta = FlowVector(values)
    return FieldEvaluation(delta=delta, xdot=apply_incidence(topology, delta))


class StratifiedSmithDynamics:
    kind = "ssd"

    def __init__(
        self,
        profile: PayoffProfile,
        topology: NetworkTopology,
        logger: Optional[Logger] = None,
    ) -> None:
        self.profile = profile
        self.topology = topology
        self.logger = logger or logging.getLogger(__name__)
        self.logger.debug(f"Initialized SSD field on {topology.node_count} nodes")

    def outflow(self, x: np.ndarray, arc: Arc) -> float:
        return ssd_outflow(self.profile, self.topology, x, arc)

    def reset(self) -> None:
        pass

    def field(self, x: np.ndarray) -> FieldEvaluation:
        return ssd_field(self.profile, self.topology, x)

    __call__ = field
