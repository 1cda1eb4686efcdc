class NetworkDynamicsError(Exception):
    """Base class for every error raised by this package"""


class ConfigurationError(NetworkDynamicsError, ValueError):
    """Invalid user-supplied input (graph, payoff, scenario, config)"""


class TopologyError(ConfigurationError):
    pass


class NodeLabelError(TopologyError):
    pass


class SelfLoopError(TopologyError):
    pass


class DuplicateEdgeError(TopologyError):
    pass


class DisconnectedGraphError(TopologyError):
    pass


class PayoffConfigError(ConfigurationError):
    pass


class ScenarioError(ConfigurationError):
    pass


class PayoffDomainError(NetworkDynamicsError, ValueError):
    """Payoff evaluated outside [0, 1]"""


class NumericalError(NetworkDynamicsError, ArithmeticError):
    pass


class LevelSolveError(NumericalError):
    """No sign change in the level bracket, i.e. the requested mass is infeasible"""


class IntegrationError(NumericalError):
    pass


class KktViolationError(NumericalError):
    pass


class InfeasibleAllocationError(NumericalError):
    pass


class SolverNonConvergenceError(NetworkDynamicsError, RuntimeError):
    pass


class OracleScaleError(NetworkDynamicsError, ValueError):
    """Instance too large for an exhaustive oracle"""


EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_NOT_CONVERGED = 3
EXIT_PROPERTY_FAILURE = 4


def exit_code_for(error: BaseException) -> int:
    """Map an exception raised while running a command to the CLI exit code"""
    if isinstance(error, SolverNonConvergenceError):
        return EXIT_NOT_CONVERGED
    if isinstance(error, (NumericalError, PayoffDomainError)):
        return EXIT_NUMERICAL
    if isinstance(error, (ConfigurationError, OSError, ValueError)):
        return EXIT_CONFIG
    return EXIT_NUMERICAL
