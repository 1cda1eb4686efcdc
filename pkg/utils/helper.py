import ast
import json
from logging import Logger
from typing import Iterable, List, Optional, Union


def parse_state(text: Union[str, Iterable, None], logger: Logger) -> Optional[List[float]]:
    """
        Accepted inputs:

        JSON string: '[0.5, 0, 0.5]'
        Python literal string: '(0.5, 0, 0.5)'
        Comma list: '0.5,0,0.5'
        Iterable of numbers: [0.5, 0, 0.5]

        Return: List[float], or None when nothing was given
    """
    if text is None:
        return None

    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]

    s = str(text).strip()
    for loader in (json.loads, ast.literal_eval):
        try:
            parsed = loader(s)
        except (ValueError, SyntaxError):
            continue
        if isinstance(parsed, (list, tuple)):
            return [float(v) for v in parsed]
    try:
        return [float(part) for part in s.split(",") if part.strip()]
    except ValueError as e:
        logger.warning(f"Could not parse state '{s}': {e}")
        raise


def parse_node(label: Union[str, int], node_count: int, logger: Logger) -> int:
    """Convert a 1-based node label to a 0-based index"""
    try:
        node = int(label)
    except (TypeError, ValueError) as e:
        logger.warning(f"Could not parse node label '{label}': {e}")
        raise ValueError(f"--node: {label!r} is not an integer") from e
    if not 1 <= node <= node_count:
        raise ValueError(f"--node: {node} outside [1, {node_count}]")
    return node - 1


def format_float(value: float) -> str:
    """Shortest round-trip representation"""
    return repr(float(value))
