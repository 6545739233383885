"""Exhaustive enumeration oracle for tiny instances.

On a grid of at most three points, a prior of at most four atoms and at
most six observations, the expected posterior mass ``P0^n Pi(V | X)`` is a
finite sum over all outcome sequences.  It is computed exactly (in rational
arithmetic when every input is a :class:`fractions.Fraction` or an int) and
compared against the implemented test-error bounds.
"""

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..bayes import DiscretePrior, domination_check
from ..certify import walker_bound
from ..exceptions import IllDefinedPosteriorError, InstanceTooLargeError
from ..measures import DominatingGrid, GridDensity
from ..rng import make_generator
from ..transforms import ht_bound_iid

__all__ = ["MAX_GRID", "MAX_ATOMS", "MAX_N", "OracleInstance", "OracleCheck",
           "brute_force_posterior_expectation", "random_instance", "check_instance"]

MAX_GRID = 3
MAX_ATOMS = 4
MAX_N = 6

SLACK_TOL = 1e-9


def _is_rational(values):
    return all(isinstance(v, (Fraction, int)) and not isinstance(v, bool) for v in values)


def brute_force_posterior_expectation(p0, atoms, masses, n, target):
    """Exact ``sum_x P0^n(x) Pi(target | x)`` over all ``x`` in ``grid^n``.

    Parameters
    ----------
    p0 : sequence
        Cell probabilities of ``P0``.
    atoms : sequence of sequences
        Cell probabilities of each prior atom.
    masses : sequence
        Prior masses.
    n : int
    target : sequence of int
        Atom indices of the target set.

    Returns
    -------
    Fraction or float
        A Fraction when all inputs are rational, else a float accurate to
        about ``1e-12``.

    Raises
    ------
    InstanceTooLargeError
        Beyond 3 grid points, 4 atoms or 6 observations.
    IllDefinedPosteriorError
        If some ``P0``-positive sequence has prior-predictive mass zero.
    """
    k, m, n = len(p0), len(atoms), int(n)
    if k > MAX_GRID or m > MAX_ATOMS or n > MAX_N or n < 0:
        raise InstanceTooLargeError(
            f"enumeration is limited to {MAX_GRID} grid points, {MAX_ATOMS} atoms and "
            f"0 <= n <= {MAX_N} (got {k}, {m}, {n})")
    if len(masses) != m or any(len(a) != k for a in atoms):
        raise ValueError("atoms and masses disagree in shape")
    flat = list(p0) + [v for a in atoms for v in a] + list(masses)
    exact = _is_rational(flat)
    conv = Fraction if exact else float
    p0 = [conv(v) for v in p0]
    atoms = [[conv(v) for v in a] for a in atoms]
    masses = [conv(v) for v in masses]
    tset = set(int(t) for t in target)
    terms = []
    for pos, x in enumerate(itertools.product(range(k), repeat=n)):
        w0 = math.prod((p0[i] for i in x), start=conv(1))
        if w0 == 0:
            continue
        lik = [masses[a] * math.prod((atoms[a][i] for i in x), start=conv(1)) for a in range(m)]
        den = sum(lik, conv(0))
        if den == 0:
            raise IllDefinedPosteriorError(pos, n)
        terms.append(w0 * sum((lik[a] for a in tset), conv(0)) / den)
    if exact:
        return sum(terms, Fraction(0))
    return math.fsum(terms)


@dataclass(frozen=True)
class OracleInstance:
    """Tiny instance: cell probabilities, prior masses, ``V``, ``B`` and ``n``."""

    p0: np.ndarray
    atoms: np.ndarray
    masses: np.ndarray
    V: tuple
    B: tuple
    n: int

    def prior(self):
        grid = DominatingGrid.uniform(self.p0.size)
        return DiscretePrior(grid, self.atoms / grid.cell_mass, self.masses)

    def P0(self):
        grid = DominatingGrid.uniform(self.p0.size)
        return GridDensity(grid, self.p0 / grid.cell_mass)


def _simplex(rng, k, zero_prob):
    p = rng.dirichlet(np.ones(k))
    if k > 1 and rng.random() < zero_prob:
        p[rng.integers(k)] = 0.0
    return p / p.sum()


def random_instance(rng):
    """Random enumerable instance whose ``B`` atoms dominate ``P0``."""
    rng = make_generator(rng)
    while True:
        k = int(rng.integers(2, MAX_GRID + 1))
        m = int(rng.integers(2, MAX_ATOMS + 1))
        p0 = _simplex(rng, k, 0.3)
        atoms = np.vstack([_simplex(rng, k, 0.3) for _ in range(m)])
        masses = rng.dirichlet(np.ones(m))
        dom = np.flatnonzero(np.all(atoms[:, p0 > 0] > 0, axis=1))
        if dom.size == 0:
            continue
        nv = int(rng.integers(1, m + 1))
        V = tuple(sorted(rng.choice(m, nv, replace=False).tolist()))
        nb = int(rng.integers(1, dom.size + 1))
        B = tuple(sorted(rng.choice(dom, nb, replace=False).tolist()))
        n = int(rng.integers(0, MAX_N + 1))
        inst = OracleInstance(p0, atoms, masses, V, B, n)
        if domination_check(inst.P0(), inst.prior()).holds_for_all_n:
            return inst


@dataclass(frozen=True)
class OracleCheck:
    """Exact value and the bounds it is compared against.

    Attributes
    ----------
    exact : float
    bounds : dict
        Bound name to ``(value, alpha)``.
    min_slack : float
        ``min(bound - exact)``; should be at least ``-1e-9``.
    """

    instance: OracleInstance
    exact: float
    bounds: dict

    @property
    def min_slack(self):
        return min(v - self.exact for v, _ in self.bounds.values())

    @property
    def passed(self):
        return self.min_slack >= -SLACK_TOL


def check_instance(inst, alphas=(0.25, 0.5, 0.75), opts=None):
    """Compare the exact expectation with ``ht_bound_iid`` and ``walker_bound``.

    Bounds are evaluated at their optimized ``alpha`` and at each fixed
    value in ``alphas``.  ``walker_bound`` is run with the single piece
    ``V`` and with ``V`` split into singletons.
    """
    exact = float(brute_force_posterior_expectation(inst.p0, inst.atoms, inst.masses, inst.n,
                                                    inst.V))
    prior, P0 = inst.prior(), inst.P0()
    D, w = prior.densities, prior.masses
    B = np.asarray(inst.B)
    pib = float(w[B].sum())
    Bc = (D[B], w[B] / pib)
    V = np.asarray(inst.V)
    bounds = {}
    val, a = ht_bound_iid(P0, D[V], Bc, pib, inst.n, "optimize", opts, return_alpha=True)
    bounds["ht_bound_iid"] = (val, a)
    for al in alphas:
        bounds[f"ht_bound_iid@{al:g}"] = (ht_bound_iid(P0, D[V], Bc, pib, inst.n, al, opts), al)
    one = walker_bound(P0, [D[V]], [D[B]], [w[V].sum()], [pib], inst.n, opts=opts)
    bounds["walker_bound"] = (one.value, one.alphas[0])
    split = walker_bound(P0, [D[[v]] for v in V], [D[B]], w[V], [pib], inst.n, opts=opts)
    bounds["walker_bound_split"] = (split.value, split.alphas)
    return OracleCheck(inst, exact, bounds)
