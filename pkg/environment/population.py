from typing import Optional, Sequence

import numpy as np

from utils.errors import ConfigurationError

SIMPLEX_TOL = 1e-9
DEBRIS_TOL = 1e-12


def as_population_state(
    x: Sequence[float], node_count: Optional[int] = None, tol: float = SIMPLEX_TOL
) -> np.ndarray:
    """Validate a point of the simplex and return a clean float copy"""
    state = np.array(x, dtype=float)
    if state.ndim != 1:
        raise ConfigurationError(f"State must be a flat vector, got shape {state.shape}")
    if node_count is not None and state.size != node_count:
        raise ConfigurationError(f"State has {state.size} entries, expected {node_count}")
    if not np.all(np.isfinite(state)):
        raise ConfigurationError("State has non-finite entries")
    if np.min(state) < -DEBRIS_TOL:
        raise ConfigurationError(f"State has a negative entry {np.min(state)}")
    total = float(np.sum(state))
    if abs(total - 1.0) > tol:
        raise ConfigurationError(f"State sums to {total}, not 1")
    return clean_state(state)


def clean_state(x: Sequence[float]) -> np.ndarray:
    """Drop round-off debris outside [0, 1] without renormalizing"""
    return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)


def random_state(
    rng: np.random.Generator, node_count: int, zero_prob: float = 0.3
) -> np.ndarray:
    """Dirichlet sample with a random subset of nodes emptied, to exercise boundary faces"""
    weights = rng.dirichlet(np.ones(node_count))
    keep = rng.random(node_count) >= zero_prob
    if not keep.any():
        keep[rng.integers(node_count)] = True
    weights = np.where(keep, weights, 0.0)
    return weights / weights.sum()
