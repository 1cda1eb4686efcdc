import numpy as np


def project_scaled_simplex(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection of v onto {w >= 0, sum(w) = radius} by sorting"""
    v = np.asarray(v, dtype=float)
    if radius <= 0.0:
        return np.zeros_like(v)
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - radius
    ranks = np.arange(1, v.size + 1)
    rho = np.nonzero(u - cumulative / ranks > 0)[0][-1]
    theta = cumulative[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def project_block_simplices(values: np.ndarray, mask: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Row-wise projection of a padded (rows, width) array onto scaled simplices.

    Only entries where ``mask`` is set belong to a row's block; padding is
    returned as zero. Rows with a nonpositive radius project to zero.
    """
    rows, width = values.shape
    counts = mask.sum(axis=1)
    padded = np.where(mask, values, -np.inf)
    u = -np.sort(-padded, axis=1)

    ranks = np.arange(1, width + 1)
    valid = ranks[None, :] <= counts[:, None]
    cumulative = np.cumsum(np.where(valid, u, 0.0), axis=1) - radii[:, None]
    active = valid & (u - cumulative / ranks[None, :] > 0)
    rho = np.maximum(active.sum(axis=1), 1)
    theta = cumulative[np.arange(rows), rho - 1] / rho

    projected = np.where(mask, np.maximum(values - theta[:, None], 0.0), 0.0)
    projected[radii <= 0.0] = 0.0
    return projected
