from .helper import format_float, parse_node, parse_state
from .logger import log_step_details, setup_logger

__all__ = [
    "format_float",
    "log_step_details",
    "parse_node",
    "parse_state",
    "setup_logger",
]
