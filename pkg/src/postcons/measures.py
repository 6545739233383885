"""Dominated probability measures on a finite grid.

A :class:`DominatingGrid` plays the role of the dominating measure: a finite
set of points with a positive mass per cell.  Densities are values with
respect to that measure, so integrals are ``sum(values * cell_mass)``.

The Hellinger distance uses the unnormalized convention
``H(P, Q)^2 = sum((sqrt(p) - sqrt(q))^2 * mu)``, which ranges over
``[0, sqrt(2)]`` and satisfies ``H^2 = 2 (1 - rho_{1/2})``.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateInputError, IncompatibleGridError
from .rng import make_generator
from .validation import check_positive_int, check_simplex

__all__ = [
    "DominatingGrid",
    "GridDensity",
    "DivergenceKind",
    "normalize",
    "divergence",
    "pairwise_divergence",
    "support_subset",
    "mixture",
    "sample",
    "safe_log",
]

_NORM_TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def safe_log(values):
    """Elementwise log with ``log(0) = -inf`` and no warnings."""
    v = np.asarray(values, dtype=float)
    out = np.full(v.shape, -np.inf)
    pos = v > 0
    out[pos] = np.log(v[pos])
    return out


class DominatingGrid:
    """Finite support with strictly positive cell masses.

    Parameters
    ----------
    points : array_like
        Distinct sample-space locations, shape ``(k,)`` or ``(k, d)``.
    cell_mass : array_like, optional
        Mass of each cell; unit masses when omitted.
    """

    __slots__ = ("points", "cell_mass")

    def __init__(self, points, cell_mass=None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 0 or pts.shape[0] < 1:
            raise DegenerateInputError("a grid needs at least one point")
        if cell_mass is None:
            cell_mass = np.ones(pts.shape[0])
        cm = np.asarray(cell_mass, dtype=float)
        if cm.shape != (pts.shape[0],):
            raise ValueError("cell_mass must have one entry per point")
        if np.any(~np.isfinite(cm)) or np.any(cm <= 0):
            raise ValueError("cell masses must be finite and strictly positive")
        flat = pts.reshape(pts.shape[0], -1)
        if np.unique(flat, axis=0).shape[0] != flat.shape[0]:
            raise ValueError("grid points must be distinct")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "cell_mass", _frozen(cm))

    def __setattr__(self, name, value):
        raise AttributeError("DominatingGrid is immutable")

    def __reduce__(self):
        return (DominatingGrid, (np.array(self.points), np.array(self.cell_mass)))

    @classmethod
    def uniform(cls, k):
        """``k`` points ``0..k-1`` with unit cells."""
        return cls(np.arange(k, dtype=float))

    @classmethod
    def from_edges(cls, edges):
        """Cells ``[edges[i], edges[i+1])`` represented by their midpoints."""
        e = np.asarray(edges, dtype=float)
        return cls(0.5 * (e[1:] + e[:-1]), np.diff(e))

    @property
    def size(self):
        return self.cell_mass.shape[0]

    def __len__(self):
        return self.size

    def equals(self, other):
        return (self is other) or (
            isinstance(other, DominatingGrid)
            and self.points.shape == other.points.shape
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.cell_mass, other.cell_mass)
        )

    def __repr__(self):
        return f"DominatingGrid(size={self.size})"


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Density of a finite measure with respect to a grid.

    Attributes
    ----------
    grid : DominatingGrid
    values : ndarray
        Nonnegative density values, read-only.
    normalized : bool
        Whether ``sum(values * cell_mass) == 1`` (checked to 1e-12).
    """

    grid: DominatingGrid
    values: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != (self.grid.size,):
            raise ValueError("density needs one value per grid point")
        if np.any(~np.isfinite(v)) or np.any(v < 0):
            raise ValueError("density values must be finite and nonnegative")
        object.__setattr__(self, "values", v)
        if self.normalized and abs(self.total() - 1.0) > _NORM_TOL:
            raise ValueError(f"density flagged normalized but integrates to {self.total()!r}")

    @classmethod
    def from_probabilities(cls, grid, probs):
        """Build the density whose cell probabilities are ``probs``."""
        probs = np.asarray(probs, dtype=float)
        return cls(grid, probs / grid.cell_mass, True)

    def total(self):
        return float(np.dot(self.values, self.grid.cell_mass))

    def probabilities(self):
        """Cell probabilities ``values * cell_mass``."""
        return self.values * self.grid.cell_mass

    def log_values(self):
        return safe_log(self.values)

    @property
    def support(self):
        return self.values > 0

    def __repr__(self):
        return f"GridDensity(size={self.grid.size}, normalized={self.normalized})"


@dataclass(frozen=True)
class DivergenceKind:
    """One of ``hellinger``, ``total_variation``, ``kl`` or ``matusita``.

    ``matusita`` carries its order ``r >= 1``.
    """

    name: str
    r: float = 2.0

    _NAMES = ("hellinger", "total_variation", "kl", "matusita")

    def __post_init__(self):
        if self.name not in self._NAMES:
            raise ValueError(f"unknown divergence {self.name!r}")
        if self.name == "matusita" and not self.r >= 1:
            raise ValueError("matusita requires r >= 1")

    @classmethod
    def parse(cls, kind):
        """Accept a ``DivergenceKind``, a name, or ``"matusita:r"``."""
        if isinstance(kind, DivergenceKind):
            return kind
        name, _, r = str(kind).partition(":")
        name = {"tv": "total_variation", "h": "hellinger"}.get(name, name)
        return cls(name, float(r)) if r else cls(name)


def _check_pair(P, Q):
    if P.grid is not Q.grid and not P.grid.equals(Q.grid):
        raise IncompatibleGridError("densities live on different grids")


def normalize(d):
    """Rescale a finite measure to a probability density.

    Raises
    ------
    DegenerateInputError
        If the total mass is zero.
    """
    total = d.total()
    if not total > 0:
        raise DegenerateInputError("cannot normalize an all-zero density")
    if d.normalized and abs(total - 1.0) <= _NORM_TOL:
        return d
    return GridDensity(d.grid, d.values / total, True)


def _kl_values(p, q, mu):
    pos = p > 0
    if np.any(q[pos] <= 0):
        return np.inf
    return float(np.sum(p[pos] * (np.log(p[pos]) - np.log(q[pos])) * mu[pos]))


def _matusita_values(p, q, mu, r):
    if r == 2.0:
        return float(np.sqrt(np.sum((np.sqrt(p) - np.sqrt(q)) ** 2 * mu)))
    s = np.abs(p ** (1.0 / r) - q ** (1.0 / r)) ** r
    return float(np.sum(s * mu) ** (1.0 / r))


def divergence(kind, P, Q):
    """Distance or divergence between two normalized densities.

    Parameters
    ----------
    kind : DivergenceKind or str
        ``"hellinger"``, ``"total_variation"``, ``"kl"`` or ``"matusita:r"``.
    P, Q : GridDensity

    Returns
    -------
    float
        ``inf`` for KL when ``P`` charges a cell that ``Q`` does not.
    """
    kind = DivergenceKind.parse(kind)
    _check_pair(P, Q)
    p, q, mu = P.values, Q.values, P.grid.cell_mass
    if kind.name == "kl":
        return _kl_values(p, q, mu)
    if kind.name == "total_variation":
        return float(0.5 * np.sum(np.abs(p - q) * mu))
    if kind.name == "hellinger":
        return _matusita_values(p, q, mu, 2.0)
    return _matusita_values(p, q, mu, float(kind.r))


def pairwise_divergence(kind, A, B, cell_mass, block=256):
    """Divergences between the rows of two density matrices.

    Parameters
    ----------
    kind : DivergenceKind or str
    A : ndarray, shape (m, k)
    B : ndarray, shape (b, k)
    cell_mass : ndarray, shape (k,)

    Returns
    -------
    ndarray, shape (m, b)
    """
    kind = DivergenceKind.parse(kind)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    mu = np.asarray(cell_mass, dtype=float)
    out = np.empty((A.shape[0], B.shape[0]))
    if kind.name == "kl":
        la, lb = safe_log(A), safe_log(B)
        for i in range(A.shape[0]):
            pos = A[i] > 0
            bad = np.any(B[:, pos] <= 0, axis=1)
            w = A[i, pos] * mu[pos]
            with np.errstate(invalid="ignore"):
                val = np.dot(w, la[i, pos]) - lb[:, pos] @ w
            out[i] = np.where(bad, np.inf, val)
        return out
    if kind.name == "total_variation":
        r, f = 1.0, lambda x: x
    elif kind.name == "hellinger":
        r, f = 2.0, np.sqrt
    else:
        r = float(kind.r)
        f = lambda x: x ** (1.0 / r)
    fa, fb = f(A), f(B)
    for start in range(0, A.shape[0], block):
        sl = slice(start, start + block)
        diff = np.abs(fa[sl, None, :] - fb[None, :, :]) ** r
        out[sl] = (diff @ mu) ** (1.0 / r)
    if kind.name == "total_variation":
        out *= 0.5
    return out


def support_subset(P, Q):
    """True iff every cell charged by ``P`` is charged by ``Q``."""
    _check_pair(P, Q)
    return bool(np.all(Q.values[P.values > 0] > 0))


def mixture(weights, components):
    """Convex combination of densities on a shared grid."""
    components = list(components)
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(components),):
        raise ValueError("one weight per component is required")
    w = check_simplex(w)
    if not components:
        raise ValueError("at least one component is required")
    grid = components[0].grid
    for c in components[1:]:
        _check_pair(components[0], c)
    vals = w @ np.stack([c.values for c in components])
    vals = vals / np.dot(vals, grid.cell_mass)
    return GridDensity(grid, vals, True)


def sample(P, n, seed):
    """Draw ``n`` i.i.d. grid indices from ``P`` by inverse CDF.

    Parameters
    ----------
    P : GridDensity
    n : int
    seed : int or numpy.random.Generator

    Returns
    -------
    ndarray of int64, shape (n,)
    """
    n = check_positive_int(n)
    rng = make_generator(seed)
    probs = P.probabilities()
    cdf = np.cumsum(probs)
    u = rng.random(n) * cdf[-1]
    idx = np.searchsorted(cdf, u, side="right")
    # rounding can push u onto the total; keep draws on the support
    last = int(np.flatnonzero(probs > 0)[-1])
    return np.minimum(idx, last).astype(np.int64)
