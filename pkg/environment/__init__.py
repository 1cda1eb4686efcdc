from .decomposition import OdDecomposition, od_decompose
from .network import (
    Arc,
    FlowSupport,
    FlowVector,
    NetworkTopology,
    apply_incidence,
    build_topology,
    support_flow_graph,
)
from .payoff import (
    CustomPayoff,
    InverseRange,
    LogPayoff,
    PayoffFunction,
    PayoffProfile,
    QuadraticPayoff,
    SaturatedInverse,
    payoff_from_spec,
)
from .population import as_population_state, clean_state, random_state

__all__ = [
    "Arc",
    "CustomPayoff",
    "FlowSupport",
    "FlowVector",
    "InverseRange",
    "LogPayoff",
    "NetworkTopology",
    "OdDecomposition",
    "PayoffFunction",
    "PayoffProfile",
    "QuadraticPayoff",
    "SaturatedInverse",
    "apply_incidence",
    "as_population_state",
    "build_topology",
    "clean_state",
    "od_decompose",
    "payoff_from_spec",
    "random_state",
    "support_flow_graph",
]
