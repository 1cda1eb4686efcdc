from .equilibrium import (
    ANALYTIC_NASH_TOL,
    NASH_TOL,
    POST_RUN_SUPPORT_TOL,
    SPC_TOL,
    SUPPORT_TOL,
    NashReport,
    SpcCheck,
    check_spc,
    equilibrium_residual,
    global_waterfill,
    global_waterfill_level,
    is_nash,
    is_refinement_nash,
)

__all__ = [
    "ANALYTIC_NASH_TOL",
    "NASH_TOL",
    "POST_RUN_SUPPORT_TOL",
    "SPC_TOL",
    "SUPPORT_TOL",
    "NashReport",
    "SpcCheck",
    "check_spc",
    "equilibrium_residual",
    "global_waterfill",
    "global_waterfill_level",
    "is_nash",
    "is_refinement_nash",
]
