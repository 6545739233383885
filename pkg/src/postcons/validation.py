"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

import numpy as np

from .exceptions import DegenerateInputError, IncompatibleGridError, OutOfDomainError

__all__ = [
    "check_alpha",
    "check_observations",
    "check_same_grid",
    "check_simplex",
    "check_positive_int",
]


def check_alpha(alpha):
    """Return ``alpha`` as a float, raising if it lies outside [0, 1]."""
    a = float(alpha)
    if not (0.0 <= a <= 1.0):
        raise OutOfDomainError(f"alpha must lie in [0, 1], got {alpha!r}")
    return a


def check_simplex(weights, size=None, atol=1e-12):
    """Validate a probability vector.

    Parameters
    ----------
    weights : array_like
    size : int, optional
        Required length.
    atol : float
        Tolerance on the total.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1:
        raise ValueError("weights must be one-dimensional")
    if size is not None and w.shape[0] != size:
        raise ValueError(f"expected {size} weights, got {w.shape[0]}")
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and nonnegative")
    if abs(w.sum() - 1.0) > atol:
        raise ValueError(f"weights must sum to 1 (sum={w.sum()!r})")
    return w


def check_observations(x, grid_size):
    """Coerce observations to a 1-d array of grid indices.

    Accepts shapes ``(n,)`` and ``(n, 1)`` (the estimator convention).
    """
    arr = np.asarray(x)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError("observations must be a 1-d sequence of grid indices")
    if arr.size == 0:
        return np.zeros(0, dtype=np.int64)
    if not np.issubdtype(arr.dtype, np.integer):
        if np.issubdtype(arr.dtype, np.floating) and np.all(arr == np.floor(arr)):
            arr = arr.astype(np.int64)
        else:
            raise ValueError("observations must be integer grid indices")
    arr = arr.astype(np.int64, copy=False)
    if arr.min() < 0 or arr.max() >= grid_size:
        raise ValueError("observation index outside the grid")
    return arr


def check_same_grid(*densities):
    """Raise unless all densities share one grid object (or equal grids)."""
    first = densities[0].grid
    for d in densities[1:]:
        if d.grid is not first and not first.equals(d.grid):
            raise IncompatibleGridError("densities live on different grids")
    return first


def check_positive_int(n, name="n", allow_zero=True):
    if isinstance(n, bool) or int(n) != n:
        raise ValueError(f"{name} must be an integer")
    n = int(n)
    if n < 0 or (n == 0 and not allow_zero):
        raise ValueError(f"{name} must be {'nonnegative' if allow_zero else 'positive'}")
    return n


def check_nonzero_total(total):
    if not total > 0:
        raise DegenerateInputError("density has zero total mass")
