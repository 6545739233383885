"""Finitely supported priors, posteriors and prior-predictive diagnostics.

Observations are grid indices.  Posterior states keep integer counts per
grid cell, so the log-likelihood of every atom is a fixed function of the
counts: sequential and batch updates give identical floating-point results.
"""

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .exceptions import (
    DegenerateInputError,
    IllDefinedPosteriorError,
    IncompatibleGridError,
    InstanceTooLargeError,
    InvalidConditioningError,
)
from .measures import DivergenceKind, GridDensity, pairwise_divergence, safe_log, sample
from .rng import make_generator, replication_seed
from .validation import check_observations, check_positive_int

__all__ = [
    "DiscretePrior",
    "PosteriorState",
    "DominationReport",
    "KLPriorReport",
    "MatchingReport",
    "posterior_update",
    "posterior_mass",
    "log_posterior_mass",
    "prior_predictive_loglik",
    "domination_check",
    "kl_prior_check",
    "matching_diagnostic",
    "greedy_net",
    "net_prior",
    "stick_breaking_prior",
]

_PROVENANCE = ("explicit", "net", "stick_breaking", "product")


def _readonly(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscretePrior:
    """Prior with finitely many atoms on a common grid.

    Attributes
    ----------
    grid : DominatingGrid
    densities : ndarray, shape (m, k)
        Atom densities, one row per atom.
    masses : ndarray, shape (m,)
        Prior masses; zeros are allowed (the atom is part of the model but
        not charged by the prior).
    labels : tuple
        Model identifiers, one per atom.
    provenance : str
        ``explicit``, ``net``, ``stick_breaking`` or ``product``.
    metadata : dict
        Free-form construction details (nets, stick weights, ...).
    """

    grid: object
    densities: np.ndarray
    masses: np.ndarray
    labels: tuple = None
    provenance: str = "explicit"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        D = _readonly(np.atleast_2d(self.densities))
        w = _readonly(self.masses)
        if D.shape[1] != self.grid.size:
            raise IncompatibleGridError("atom densities do not match the grid")
        if w.shape != (D.shape[0],):
            raise ValueError("one mass per atom is required")
        if D.shape[0] == 0:
            raise DegenerateInputError("a prior needs at least one atom")
        if np.any(~np.isfinite(w)) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("prior masses must be a probability vector")
        if np.any(~np.isfinite(D)) or np.any(D < 0):
            raise ValueError("densities must be finite and nonnegative")
        tot = D @ self.grid.cell_mass
        if np.any(np.abs(tot - 1.0) > 1e-10):
            raise ValueError("every atom density must be normalized")
        if self.provenance not in _PROVENANCE:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        labels = tuple(range(D.shape[0])) if self.labels is None else tuple(self.labels)
        if len(labels) != D.shape[0]:
            raise ValueError("one label per atom is required")
        object.__setattr__(self, "densities", D)
        object.__setattr__(self, "masses", w)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_logd", _readonly(safe_log(D)))

    @classmethod
    def from_densities(cls, densities, masses=None, labels=None, provenance="explicit",
                       metadata=None):
        """Build a prior from a sequence of :class:`GridDensity`."""
        densities = list(densities)
        if not densities:
            raise DegenerateInputError("a prior needs at least one atom")
        grid = densities[0].grid
        for d in densities[1:]:
            if d.grid is not grid and not grid.equals(d.grid):
                raise IncompatibleGridError("atoms live on different grids")
        m = len(densities)
        if masses is None:
            masses = np.full(m, 1.0 / m)
        return cls(grid, np.stack([d.values for d in densities]), masses, labels,
                   provenance, dict(metadata or {}))

    @property
    def size(self):
        return self.densities.shape[0]

    @property
    def log_densities(self):
        return self._logd

    @property
    def log_masses(self):
        return safe_log(self.masses)

    @property
    def charged(self):
        """Boolean mask of atoms with positive prior mass."""
        return self.masses > 0

    def atom(self, i):
        return GridDensity(self.grid, self.densities[i], True)

    def atoms(self):
        return [self.atom(i) for i in range(self.size)]

    def mask(self, subset):
        """Resolve ``subset`` (None, callable on labels, bool mask or indices)."""
        return _subset_mask(self, subset)

    def mass(self, subset):
        return float(self.masses[self.mask(subset)].sum())

    def conditioned(self, subset):
        """The prior restricted to ``subset`` and renormalized.

        Raises
        ------
        InvalidConditioningError
            If ``subset`` has prior mass zero.
        """
        sel = self.mask(subset)
        tot = self.masses[sel].sum()
        if not tot > 0:
            raise InvalidConditioningError("conditioning set has prior mass zero")
        idx = np.flatnonzero(sel)
        w = self.masses[idx] / tot
        w = w / w.sum()
        return DiscretePrior(self.grid, self.densities[idx], w,
                             tuple(self.labels[i] for i in idx), self.provenance,
                             {"parent_indices": idx})

    def with_masses(self, masses, provenance=None, metadata=None):
        return DiscretePrior(self.grid, self.densities, masses, self.labels,
                             provenance or self.provenance,
                             dict(self.metadata if metadata is None else metadata))

    def __repr__(self):
        return (f"DiscretePrior(atoms={self.size}, charged={int(self.charged.sum())}, "
                f"provenance={self.provenance!r})")


def _subset_mask(prior, subset):
    m = prior.size
    if subset is None:
        return np.ones(m, bool)
    if callable(subset):
        return np.array([bool(subset(lab)) for lab in prior.labels], dtype=bool)
    arr = np.asarray(subset)
    if arr.dtype == bool:
        if arr.shape != (m,):
            raise ValueError("boolean subset must have one entry per atom")
        return arr.copy()
    out = np.zeros(m, bool)
    out[arr.astype(np.int64).ravel()] = True
    return out


def _loglik_from_counts(log_densities, counts):
    cols = np.flatnonzero(counts)
    if cols.size == 0:
        return np.zeros(log_densities.shape[0])
    with np.errstate(invalid="ignore"):
        return log_densities[:, cols] @ counts[cols].astype(float)


@dataclass(frozen=True, eq=False)
class PosteriorState:
    """Posterior after ``n_observed`` observations.

    Attributes
    ----------
    prior : DiscretePrior
    counts : ndarray of int64
        Number of observations per grid cell.
    log_likelihood : ndarray
        Per-atom cumulative log-likelihood.
    log_weights : ndarray
        Unnormalized log posterior weights (log prior + log-likelihood).
    n_observed : int
    """

    prior: DiscretePrior
    counts: np.ndarray
    log_likelihood: np.ndarray
    log_weights: np.ndarray
    n_observed: int

    @classmethod
    def initial(cls, prior):
        k = prior.grid.size
        zero = np.zeros(prior.size)
        return cls(prior, _readonly(np.zeros(k, np.int64), np.int64), _readonly(zero),
                   _readonly(prior.log_masses), 0)

    def masses(self):
        """Normalized posterior masses."""
        return np.exp(self.log_weights - logsumexp(self.log_weights))


def _state_from_counts(prior, counts):
    ll = _loglik_from_counts(prior.log_densities, counts)
    with np.errstate(invalid="ignore"):
        lw = prior.log_masses + ll
    return ll, lw


def posterior_update(state, x):
    """Condition ``state`` on further observations ``x``.

    Raises
    ------
    IllDefinedPosteriorError
        When every charged atom gives the data likelihood zero; ``index``
        locates the first offending observation within ``x``.
    """
    prior = state.prior
    x = check_observations(x, prior.grid.size)
    if x.size == 0:
        return state
    counts = state.counts + np.bincount(x, minlength=prior.grid.size)
    ll, lw = _state_from_counts(prior, counts)
    if not np.any(lw > -np.inf):
        c = state.counts.copy()
        for j, xj in enumerate(x):
            c[xj] += 1
            if not np.any(_state_from_counts(prior, c)[1] > -np.inf):
                raise IllDefinedPosteriorError(j, state.n_observed + j + 1)
    return PosteriorState(prior, _readonly(counts, np.int64), _readonly(ll), _readonly(lw),
                          state.n_observed + int(x.size))


def log_posterior_mass(state, subset):
    """Natural log of :func:`posterior_mass`; ``-inf`` for empty subsets."""
    sel = _subset_mask(state.prior, subset)
    if not sel.any():
        return -np.inf
    lw = state.log_weights
    with np.errstate(divide="ignore"):
        return float(min(0.0, logsumexp(lw[sel]) - logsumexp(lw)))


def posterior_mass(state, subset):
    """Posterior probability of the atoms selected by ``subset``."""
    return float(np.exp(log_posterior_mass(state, subset)))


def prior_predictive_loglik(prior, x, restrict_to=None):
    """Log prior-predictive density of ``x``, optionally local to a subset.

    Returns
    -------
    float
        ``log sum_a w_a prod_j p_a(x_j)`` with ``w`` the (conditioned) masses.
    """
    x = check_observations(x, prior.grid.size)
    counts = np.bincount(x, minlength=prior.grid.size)
    ll = _loglik_from_counts(prior.log_densities, counts)
    if restrict_to is None:
        lm = prior.log_masses
    else:
        sel = _subset_mask(prior, restrict_to)
        tot = prior.masses[sel].sum()
        if not tot > 0:
            raise InvalidConditioningError("restricted prior mass is zero")
        lm = np.where(sel, safe_log(prior.masses) - np.log(tot), -np.inf)
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = lm + ll
        return float(logsumexp(terms)) if np.any(terms > -np.inf) else -np.inf


# ------------------------------------------------------------ diagnostics


@dataclass(frozen=True)
class DominationReport:
    holds_for_all_n: bool
    failing_n: int = None
    covering_atom: object = None


def _min_hitting_set(sets, max_combinations=2_000_000):
    universe = sorted(set().union(*sets))
    sets = [frozenset(s) for s in set(map(frozenset, sets))]
    checked = 0
    for size in range(1, len(universe) + 1):
        for combo in itertools.combinations(universe, size):
            checked += 1
            if checked > max_combinations:
                raise InstanceTooLargeError("hitting-set search exceeded its budget")
            cs = set(combo)
            if all(cs & s for s in sets):
                return size
    return len(universe)


def domination_check(P0, prior):
    """Does the prior predictive dominate ``P0^n`` for every ``n``?

    A sequence of ``P0``-positive points has prior-predictive density zero
    exactly when it leaves the support of every charged atom, that is when
    its point set hits every ``supp(p0) minus supp(q)``.  The first failing
    ``n`` is therefore the size of a minimum hitting set.
    """
    if P0.grid is not prior.grid and not P0.grid.equals(prior.grid):
        raise IncompatibleGridError("P0 and prior live on different grids")
    s0 = P0.values > 0
    idx = np.flatnonzero(prior.charged)
    gaps = []
    for i in idx:
        missing = np.flatnonzero(s0 & ~(prior.densities[i] > 0))
        if missing.size == 0:
            return DominationReport(True, None, prior.labels[i])
        gaps.append(set(missing.tolist()))
    return DominationReport(False, _min_hitting_set(gaps), None)


@dataclass(frozen=True)
class KLPriorReport:
    deltas: tuple
    masses: tuple
    passed: bool
    inf_kl: float
    argmin_atom: object


def _kl_to_atoms(P0, densities):
    return pairwise_divergence("kl", P0.values[None, :], densities, P0.grid.cell_mass)[0]


def kl_prior_check(P0, prior, deltas):
    """Prior mass of Kullback-Leibler neighbourhoods of ``P0``.

    Parameters
    ----------
    deltas : sequence of float
        Strictly decreasing positive radii.

    Returns
    -------
    KLPriorReport
        ``passed`` iff every neighbourhood ``{KL(P0||Q) < delta}`` has
        positive mass.
    """
    d = np.asarray(deltas, dtype=float)
    if d.ndim != 1 or d.size == 0 or np.any(d <= 0) or np.any(np.diff(d) >= 0):
        raise ValueError("deltas must be strictly decreasing and positive")
    kl = _kl_to_atoms(P0, prior.densities)
    charged = prior.charged
    masses = tuple(float(prior.masses[charged & (kl < delta)].sum()) for delta in d)
    klc = np.where(charged, kl, np.inf)
    j = int(np.argmin(klc))
    return KLPriorReport(tuple(d.tolist()), masses, all(m > 0 for m in masses),
                         float(klc[j]), prior.labels[j] if np.isfinite(klc[j]) else None)


@dataclass(frozen=True)
class MatchingReport:
    """Monte Carlo trajectories of ``(1/n) log(dP0^n / dP_n)``.

    Attributes
    ----------
    ns : ndarray
    quantiles : dict
        Quantile level -> per-``n`` values of the normalized log ratio.
    c_hat : float
        Median over replications of ``max_{n >= n_max/2} |ratio_n|``.
    breaches : list of tuple
        ``(replication, seed, n)`` where the predictive density vanished.
    """

    ns: np.ndarray
    quantiles: dict
    c_hat: float
    breaches: list


def matching_diagnostic(P0, prior, n_max, reps, seed, levels=(0.1, 0.5, 0.9)):
    """Estimate the matching constant of ``P0`` and the prior predictive."""
    n_max = check_positive_int(n_max, "n_max", allow_zero=False)
    reps = check_positive_int(reps, "reps", allow_zero=False)
    ns = np.arange(1, n_max + 1)
    lp0 = safe_log(P0.values)
    lm = prior.log_masses
    traj = np.full((reps, n_max), np.nan)
    breaches = []
    for r in range(reps):
        s = replication_seed(seed, r)
        x = sample(P0, n_max, make_generator(s))
        with np.errstate(invalid="ignore"):
            cum = np.cumsum(prior.log_densities[:, x], axis=1) + lm[:, None]
        with np.errstate(divide="ignore"):
            pred = logsumexp(cum, axis=0)
        bad = np.flatnonzero(~np.isfinite(pred))
        num = np.cumsum(lp0[x])
        ratio = (num - pred) / ns
        if bad.size:
            breaches.append((r, s, int(bad[0]) + 1))
            ratio[bad[0]:] = np.nan
        traj[r] = ratio
    with warnings.catch_warnings():
        # columns past a breach in every replication are all NaN
        warnings.simplefilter("ignore", RuntimeWarning)
        quant = {q: np.nanquantile(traj, q, axis=0) if np.any(np.isfinite(traj)) else
                 np.full(n_max, np.nan) for q in levels}
    tail = np.abs(traj[:, (n_max - 1) // 2:])
    per_rep = np.where(np.all(np.isnan(tail), axis=1), np.inf,
                       np.nanmax(np.where(np.isnan(tail), -np.inf, tail), axis=1))
    return MatchingReport(ns, quant, float(np.median(per_rep)), breaches)


# ------------------------------------------------------------ constructors


def greedy_net(dist, eta):
    """Greedy farthest-point ``eta``-net of a finite metric space.

    Parameters
    ----------
    dist : ndarray, shape (m, m)
        Pairwise distances.
    eta : float

    Returns
    -------
    ndarray of int
        Center indices; every point lies at distance ``< eta`` from one.
        The first center is index 0 and ties go to the lowest index.
    """
    m = dist.shape[0]
    centers = [0]
    near = dist[0].copy()
    while True:
        j = int(np.argmax(near))
        if near[j] < eta:
            break
        centers.append(j)
        near = np.minimum(near, dist[j])
    return np.array(centers, dtype=np.int64)


def _family_matrix(model):
    if isinstance(model, DiscretePrior):
        return model.grid, np.asarray(model.densities), model.labels
    model = list(model)
    if not model:
        raise DegenerateInputError("the model family is empty")
    grid = model[0].grid
    return grid, np.stack([d.values for d in model]), tuple(range(len(model)))


def net_prior(model, metric, eta, lam):
    """Net prior over a finite family.

    Level ``m`` places mass ``lam[m]`` uniformly on a greedy ``eta[m]``-net
    of the family.  The prior is returned over the whole family, members
    outside every net carrying mass zero.

    Parameters
    ----------
    model : sequence of GridDensity or DiscretePrior
    metric : DivergenceKind or str
    eta : sequence of float
        Strictly decreasing radii.
    lam : sequence of float
        Level masses summing to one.
    """
    grid, D, labels = _family_matrix(model)
    eta = np.asarray(eta, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if eta.shape != lam.shape or eta.size == 0:
        raise ValueError("eta and lambda need the same nonzero length")
    if np.any(eta <= 0) or np.any(np.diff(eta) >= 0):
        raise ValueError("eta must be strictly decreasing and positive")
    if np.any(lam < 0) or abs(lam.sum() - 1.0) > 1e-12:
        raise ValueError("lambda must be a probability vector")
    metric = DivergenceKind.parse(metric)
    dist = pairwise_divergence(metric, D, D, grid.cell_mass)
    masses = np.zeros(D.shape[0])
    nets = []
    for e, l in zip(eta, lam):
        c = greedy_net(dist, e)
        nets.append(c)
        masses[c] += l / c.size
    masses = masses / masses.sum()
    return DiscretePrior(grid, D, masses, labels, "net",
                         {"nets": nets, "eta": eta, "lambda": lam, "metric": metric})


def stick_breaking_prior(base, concentration, truncation, kernel, draws, seed):
    """Uniform prior over Monte Carlo draws of truncated stick-breaking mixtures.

    Parameters
    ----------
    base : GridDensity
        Distribution of the latent values, on a grid of latents.
    concentration : float
    truncation : int
        Number of sticks ``K``; the remainder is folded into stick ``K``.
    kernel : callable
        Maps a latent value to a :class:`GridDensity` on the data grid.
    draws : int
    seed : int or Generator

    Returns
    -------
    DiscretePrior
        Labels are dicts with the stick ``weights`` and ``latents``.
    """
    K = check_positive_int(truncation, "truncation", allow_zero=False)
    draws = check_positive_int(draws, "draws", allow_zero=False)
    if not concentration > 0:
        raise ValueError("concentration must be positive")
    rng = make_generator(seed)
    latents_grid = np.asarray(base.grid.points, dtype=float)
    cache = {}
    rows, labels = [], []
    grid = None
    for _ in range(draws):
        v = rng.beta(1.0, concentration, size=K - 1)
        rest = np.concatenate([[1.0], np.cumprod(1.0 - v)])
        w = np.empty(K)
        w[:-1] = v * rest[:-1]
        w[-1] = rest[-1]
        z = latents_grid[sample(base, K, rng)]
        dens = 0.0
        for wk, zk in zip(w, z):
            key = float(zk)
            if key not in cache:
                cache[key] = kernel(zk)
            kd = cache[key]
            grid = kd.grid
            dens = dens + wk * kd.values
        rows.append(dens)
        labels.append({"weights": w, "latents": z})
    D = np.stack(rows)
    D = D / (D @ grid.cell_mass)[:, None]
    return DiscretePrior(grid, D, np.full(draws, 1.0 / draws), tuple(labels), "stick_breaking",
                         {"concentration": concentration, "truncation": K})
