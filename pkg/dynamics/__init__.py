from logging import Logger
from typing import Optional

from environment import NetworkTopology, PayoffProfile
from utils.errors import ConfigurationError

from .base import FieldEvaluation, VectorField
from .nbrd import (
    BestResponse,
    NodalBestResponseDynamics,
    enumerate_supports_p2,
    nbrd_field,
    resolve_p2_projected,
    solve_node_best_response,
    verify_kkt_p2,
)
from .nrpm import (
    NetworkPayoffMaximization,
    Reallocation,
    SupportPattern,
    brute_force_p3,
    enumerate_supports_p3,
    nrpm_field,
    solve_p3,
    support_value,
    verify_support_pattern,
    z_star,
)
from .ssd import StratifiedSmithDynamics, ssd_field, ssd_outflow, ssd_outflow_quadrature

DYNAMICS_KINDS = ("ssd", "nbrd", "nrpm")


def build_dynamics(
    kind: str,
    profile: PayoffProfile,
    topology: NetworkTopology,
    kkt_check_every: int = 100,
    logger: Optional[Logger] = None,
) -> VectorField:
    if len(profile) != topology.node_count:
        raise ConfigurationError(
            f"Payoff profile has {len(profile)} nodes, graph has {topology.node_count}"
        )
    choice = str(kind).lower()
    if choice == "ssd":
        return StratifiedSmithDynamics(profile, topology, logger=logger)
    if choice == "nbrd":
        return NodalBestResponseDynamics(
            profile, topology, kkt_check_every=kkt_check_every, logger=logger
        )
    if choice == "nrpm":
        return NetworkPayoffMaximization(profile, topology, logger=logger)
    raise ConfigurationError(f"Unsupported dynamics: {kind}")


__all__ = [
    "DYNAMICS_KINDS",
    "BestResponse",
    "FieldEvaluation",
    "NetworkPayoffMaximization",
    "NodalBestResponseDynamics",
    "Reallocation",
    "StratifiedSmithDynamics",
    "SupportPattern",
    "VectorField",
    "brute_force_p3",
    "build_dynamics",
    "enumerate_supports_p2",
    "enumerate_supports_p3",
    "nbrd_field",
    "nrpm_field",
    "resolve_p2_projected",
    "solve_node_best_response",
    "solve_p3",
    "ssd_field",
    "ssd_outflow",
    "ssd_outflow_quadrature",
    "support_value",
    "verify_kkt_p2",
    "verify_support_pattern",
    "z_star",
]
