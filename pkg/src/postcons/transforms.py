"""Hellinger transforms, power moments and testing-power functionals.

The central quantity is

    pi(W, B) = inf_{0 <= a <= 1}  sup_{P in co(V)}  sup_{Q in B}  P0 (p / q)^a

with the implicit support convention: integrals run over cells where
``p0``, ``p`` and ``q`` are all positive.  For fixed ``a`` and ``Q`` the map
``lam -> P0 (p_lam / q)^a`` is concave on the simplex; as a function of
``a`` every such moment is convex.  The double problem is solved as
``inf_a max_Q sup_lam`` with golden section outside and Frank-Wolfe inside.
Every reported value is an upper envelope: inner maxima are replaced by
their duality-gap upper bounds.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ._optim import frank_wolfe, golden_section, log_profile, power_profile
from .exceptions import (
    DegenerateInputError,
    IncompatibleGridError,
    InvalidConditioningError,
    UndefinedSequenceError,
)
from .measures import GridDensity, safe_log
from .validation import check_alpha, check_observations

__all__ = [
    "SolverOptions",
    "PowerMomentResult",
    "TestingPowerResult",
    "KLSeparation",
    "hellinger_transform",
    "power_moment",
    "power_moment_derivative",
    "testing_power",
    "testing_power_at",
    "kl_separation",
    "kl_inf_over_hull",
    "minimax_test_indicator",
    "ht_bound_iid",
    "ht_bound_curve",
    "envelope_violation",
]


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances of the testing-power solver.

    Attributes
    ----------
    alpha_tol : float
        Final golden-section bracket width.
    inner_tol : float
        Frank-Wolfe duality-gap threshold.
    fw_max_iter : int
        Iteration cap of each Frank-Wolfe run.
    """

    alpha_tol: float = 1e-6
    inner_tol: float = 1e-8
    fw_max_iter: int = 500

    @classmethod
    def coerce(cls, opts):
        if opts is None:
            return cls()
        if isinstance(opts, cls):
            return opts
        return cls(**dict(opts))


@dataclass(frozen=True)
class PowerMomentResult:
    value: float
    limit_at_zero: float
    limit_at_one: float


@dataclass(frozen=True)
class TestingPowerResult:
    """Outcome of :func:`testing_power`.

    ``pi_value`` is an upper envelope for the infimum over ``alpha``:
    the objective at ``(alpha_star, mixture_star, witness_Q)`` never exceeds
    ``pi_value + tolerance_used``.
    """

    pi_value: float
    alpha_star: float
    mixture_star: np.ndarray
    witness_Q: int
    converged: bool
    tolerance_used: float
    evaluations: int = 0

    __test__ = False

    @property
    def exponent(self):
        """Per-observation exponent ``-log pi``."""
        return np.inf if self.pi_value <= 0 else float(-np.log(self.pi_value))


@dataclass(frozen=True)
class KLSeparation:
    sup_B: float
    argsup_B: int
    inf_coV: float
    inf_coV_lower: float
    weights: np.ndarray
    separated: bool
    margin: float
    converged: bool = True


# ---------------------------------------------------------------- helpers


def _as_matrix(dens, grid=None):
    """Stack densities (or accept a matrix) into shape ``(m, k)``."""
    if isinstance(dens, GridDensity):
        dens = [dens]
    if isinstance(dens, np.ndarray):
        M = np.atleast_2d(np.asarray(dens, dtype=float))
        return M
    dens = list(dens)
    if not dens:
        raise DegenerateInputError("an empty set of densities was given")
    if grid is not None:
        for d in dens:
            if isinstance(d, GridDensity) and d.grid is not grid and not grid.equals(d.grid):
                raise IncompatibleGridError("densities live on different grids")
    return np.stack([d.values if isinstance(d, GridDensity) else np.asarray(d, dtype=float)
                     for d in dens])


def _unpack(P0, V, B):
    if not isinstance(P0, GridDensity):
        raise TypeError("P0 must be a GridDensity")
    grid = P0.grid
    Vm = _as_matrix(V, grid)
    Qm = _as_matrix(B, grid)
    k = grid.size
    if Vm.shape[1] != k or Qm.shape[1] != k:
        raise IncompatibleGridError("density matrix does not match the grid")
    if Vm.shape[0] == 0 or Qm.shape[0] == 0:
        raise DegenerateInputError("V and B must be nonempty")
    return P0.values, Vm, Qm, grid.cell_mass


def _region_weights(p0, Qm, mu, alpha):
    """``p0 mu q^{-alpha}`` on ``{p0 > 0, q > 0}``, zero elsewhere."""
    region = (p0 > 0)[None, :] & (Qm > 0)
    lq = safe_log(Qm)
    with np.errstate(invalid="ignore"):
        W = (p0 * mu)[None, :] * np.exp(-alpha * np.where(region, lq, 0.0))
    return np.where(region, W, 0.0)


@dataclass
class _InnerResult:
    upper: np.ndarray
    value: np.ndarray
    lam: np.ndarray
    converged: np.ndarray


def _inner_sup(alpha, p0, Vm, Qm, mu, opts, lam0=None):
    """``sup_lam P0 (p_lam/q)^alpha`` for every row of ``Qm``."""
    b, m = Qm.shape[0], Vm.shape[0]
    W = _region_weights(p0, Qm, mu, alpha)
    if alpha == 0.0:
        union = np.any(Vm > 0, axis=0)
        val = (W * union[None, :]).sum(axis=1)
        return _InnerResult(val, val, np.full((b, m), 1.0 / m), np.ones(b, bool))
    if alpha == 1.0 or m == 1:
        # linear in lam (alpha = 1) or no simplex at all: vertices suffice
        A = W @ (Vm ** alpha).T
        best = np.argmax(A, axis=1)
        lam = np.zeros((b, m))
        lam[np.arange(b), best] = 1.0
        val = A[np.arange(b), best]
        return _InnerResult(val, val, lam, np.ones(b, bool))
    fw = frank_wolfe(Vm, W, power_profile(alpha), lam0=lam0, tol=opts.inner_tol,
                     max_iter=opts.fw_max_iter)
    return _InnerResult(fw.upper, fw.value, fw.lam, fw.converged)


def _max_row(values):
    """Index of the maximum, ties broken by the lowest index."""
    return int(np.argmax(values))


# ------------------------------------------------------------- transforms


def hellinger_transform(mu, nu, alpha):
    """``rho_alpha(mu, nu) = sum m^alpha v^(1-alpha) cell_mass``.

    Terms where either density vanishes are dropped, which gives the
    continuous extension to the endpoints.
    """
    alpha = check_alpha(alpha)
    if mu.grid is not nu.grid and not mu.grid.equals(nu.grid):
        raise IncompatibleGridError("densities live on different grids")
    m, v, cm = mu.values, nu.values, mu.grid.cell_mass
    both = (m > 0) & (v > 0)
    lm, lv = np.log(m[both]), np.log(v[both])
    return float(np.sum(np.exp(alpha * lm + (1.0 - alpha) * lv) * cm[both]))


def _triple(P0, P, Q):
    for d in (P, Q):
        if d.grid is not P0.grid and not P0.grid.equals(d.grid):
            raise IncompatibleGridError("densities live on different grids")
    p0, p, q = P0.values, P.values, Q.values
    reg = (p0 > 0) & (p > 0) & (q > 0)
    w = p0[reg] * P0.grid.cell_mass[reg]
    lr = np.log(p[reg]) - np.log(q[reg])
    return w, lr


def power_moment(P0, P, Q, alpha):
    """``P0 (p/q)^alpha`` over the cells where all three densities are positive.

    Returns
    -------
    PowerMomentResult
        Value at ``alpha`` together with the two endpoint limits.
    """
    alpha = check_alpha(alpha)
    w, lr = _triple(P0, P, Q)
    return PowerMomentResult(
        value=float(np.sum(w * np.exp(alpha * lr))),
        limit_at_zero=float(np.sum(w)),
        limit_at_one=float(np.sum(w * np.exp(lr))),
    )


def power_moment_derivative(P0, P, Q, alpha):
    """Derivative in ``alpha`` of :func:`power_moment`."""
    alpha = check_alpha(alpha)
    w, lr = _triple(P0, P, Q)
    return float(np.sum(w * np.exp(alpha * lr) * lr))


# ---------------------------------------------------------- testing power


class _PowerSolver:
    """Memoized ``alpha -> max_Q sup_lam`` evaluator with warm starts."""

    def __init__(self, p0, Vm, Qm, mu, opts):
        self.p0, self.Vm, self.Qm, self.mu, self.opts = p0, Vm, Qm, mu, opts
        self.lam = None
        self.cache = {}

    def __call__(self, alpha):
        if alpha in self.cache:
            return self.cache[alpha][0]
        res = _inner_sup(alpha, self.p0, self.Vm, self.Qm, self.mu, self.opts, self.lam)
        if 0.0 < alpha < 1.0 and self.Vm.shape[0] > 1:
            self.lam = res.lam
        val = float(np.max(res.upper))
        self.cache[alpha] = (val, res)
        return val


def testing_power(P0, V, B, opts=None):
    """Upper envelope of ``inf_alpha sup_{co(V) x B} P0 (p/q)^alpha``.

    Parameters
    ----------
    P0 : GridDensity
    V : sequence of GridDensity or ndarray of shape (m, k)
        Extreme points of the convex hull.
    B : sequence of GridDensity or ndarray of shape (b, k)
    opts : SolverOptions or mapping, optional

    Returns
    -------
    TestingPowerResult

    Examples
    --------
    >>> from postcons.measures import DominatingGrid, GridDensity
    >>> g = DominatingGrid.uniform(2)
    >>> P0 = GridDensity(g, [0.5, 0.5])
    >>> res = testing_power(P0, [GridDensity(g, [0.9, 0.1])], [P0])
    >>> round(res.pi_value, 4), round(res.alpha_star, 3)
    (0.8937, 0.458)
    """
    opts = SolverOptions.coerce(opts)
    p0, Vm, Qm, mu = _unpack(P0, V, B)
    solver = _PowerSolver(p0, Vm, Qm, mu, opts)
    f0, f1 = solver(0.0), solver(1.0)
    x, fx, n_eval = golden_section(solver, 0.0, 1.0, tol=opts.alpha_tol)
    candidates = [(fx, x), (f0, 0.0), (f1, 1.0)]
    pi_val, a_star = min(candidates, key=lambda t: (t[0], t[1]))
    res = solver.cache[a_star][1]
    w = _max_row(res.upper)
    return TestingPowerResult(
        pi_value=float(pi_val),
        alpha_star=float(a_star),
        mixture_star=res.lam[w].copy(),
        witness_Q=w,
        converged=bool(np.all(res.converged)),
        tolerance_used=opts.inner_tol,
        evaluations=n_eval + 2,
    )


def testing_power_at(P0, V, B, alpha, opts=None):
    """Per-``Q`` inner suprema at a fixed ``alpha`` (upper bounds)."""
    opts = SolverOptions.coerce(opts)
    p0, Vm, Qm, mu = _unpack(P0, V, B)
    return _inner_sup(check_alpha(alpha), p0, Vm, Qm, mu, opts).upper


def _objective_at(P0, Vm, q, alpha, lam):
    p = lam @ Vm
    p0, mu = P0.values, P0.grid.cell_mass
    reg = (p0 > 0) & (p > 0) & (q > 0)
    return float(np.sum(p0[reg] * mu[reg] * np.exp(alpha * (np.log(p[reg]) - np.log(q[reg])))))


def envelope_violation(P0, V, B, result, resolution=20):
    """Largest excess of the objective over ``pi_value`` on a simplex lattice.

    Evaluates the objective at ``alpha_star`` on every point of the lattice
    with spacing ``1/resolution`` and every ``Q``; returns
    ``max(objective) - pi_value`` (nonpositive when the envelope holds).
    Also includes the reported optimizer ``(mixture_star, witness_Q)``.
    """
    _, Vm, Qm, _ = _unpack(P0, V, B)
    m = Vm.shape[0]
    a = result.alpha_star
    worst = -np.inf
    lattice = [np.array(c, dtype=float) / resolution
               for c in itertools.product(range(resolution + 1), repeat=m)
               if sum(c) == resolution]
    for q in Qm:
        for lam in lattice:
            worst = max(worst, _objective_at(P0, Vm, q, a, lam))
    worst = max(worst, _objective_at(P0, Vm, Qm[result.witness_Q], a, result.mixture_star))
    return worst - result.pi_value


# ----------------------------------------------------------- KL separation


def kl_inf_over_hull(P0, V, opts=None):
    """``inf_{P in co(V)} KL(P0 || P)``.

    Returns
    -------
    value : float
        KL at the best mixture found (``inf`` on support mismatch).
    lower : float
        Certified lower bound from the duality gap.
    weights : ndarray
    converged : bool
    """
    opts = SolverOptions.coerce(opts)
    p0, Vm, _, mu = _unpack(P0, V, [P0])
    m = Vm.shape[0]
    pos = p0 > 0
    if np.any(~np.any(Vm[:, pos] > 0, axis=0)):
        return np.inf, np.inf, np.full(m, 1.0 / m), True
    w0 = p0[pos] * mu[pos]
    ent = float(np.dot(w0, np.log(p0[pos])))
    Vp = Vm[:, pos]
    if m == 1:
        val = ent - float(np.dot(w0, np.log(Vp[0])))
        return val, val, np.ones(1), True
    fw = frank_wolfe(Vp, w0[None, :], log_profile(), tol=opts.inner_tol,
                     max_iter=opts.fw_max_iter * 4)
    return (ent - float(fw.value[0]), ent - float(fw.upper[0]),
            fw.lam[0].copy(), bool(fw.converged[0]))


def kl_separation(P0, V, B, opts=None):
    """Compare ``sup_B KL(P0||Q)`` with ``inf_{co(V)} KL(P0||P)``.

    Returns
    -------
    KLSeparation
        ``separated`` is ``sup_B < inf_coV``; ``margin`` is their difference
        (``nan`` when both are infinite).
    """
    p0, Vm, Qm, mu = _unpack(P0, V, B)
    pos = p0 > 0
    kls = np.empty(Qm.shape[0])
    for j, q in enumerate(Qm):
        if np.any(q[pos] <= 0):
            kls[j] = np.inf
        else:
            kls[j] = float(np.sum(p0[pos] * mu[pos] * (np.log(p0[pos]) - np.log(q[pos]))))
    j = _max_row(kls)
    sup_b = float(kls[j])
    inf_v, lower, w, conv = kl_inf_over_hull(P0, Vm, opts)
    with np.errstate(invalid="ignore"):
        margin = inf_v - sup_b
    return KLSeparation(sup_b, j, inf_v, lower, w, bool(sup_b < inf_v), float(margin), conv)


# ------------------------------------------------------------------ tests


def minimax_test_indicator(P_mix, predictive_logdensity, x):
    """Likelihood-ratio indicator of the mixture against a predictive.

    Parameters
    ----------
    P_mix : GridDensity
        Single-observation mixture density; its ``n``-fold product is used.
    predictive_logdensity : callable
        Maps an observation sequence to its log predictive density.
    x : sequence of int
        Grid indices, length at least one.

    Returns
    -------
    int
        1 iff ``log p_mix^n(x) > log predictive(x)``.
    """
    x = check_observations(x, P_mix.grid.size)
    if x.size == 0:
        raise ValueError("at least one observation is required")
    lhs = float(np.sum(safe_log(P_mix.values)[x]))
    rhs = float(predictive_logdensity(x))
    if lhs == -np.inf and rhs == -np.inf:
        raise UndefinedSequenceError("both densities vanish on the sequence")
    return int(lhs - rhs > 0)


# --------------------------------------------------------- n-sample bounds


def _weighted_atoms(B_atoms):
    if hasattr(B_atoms, "densities") and hasattr(B_atoms, "masses"):
        Qm, w = np.asarray(B_atoms.densities), np.asarray(B_atoms.masses, dtype=float)
    else:
        atoms, w = B_atoms
        Qm, w = _as_matrix(atoms), np.asarray(w, dtype=float)
    if w.shape != (Qm.shape[0],) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("B_atoms masses must be a probability vector over B")
    keep = w > 0
    return Qm[keep], w[keep]


def _log_bound(sups, w, log_pib, alpha, ns):
    ns = np.atleast_1d(np.asarray(ns, dtype=float))
    with np.errstate(divide="ignore"):
        ls = np.log(sups)
        lw = np.log(w)
    terms = np.where(ns[:, None] == 0, 0.0, ns[:, None] * ls[None, :]) + lw[None, :]
    return -alpha * log_pib + logsumexp(terms, axis=1)


def ht_bound_curve(P0, V, B_atoms, PiB_mass, ns, alpha, opts=None):
    """Bound of :func:`ht_bound_iid` at a fixed ``alpha`` for several ``n``."""
    opts = SolverOptions.coerce(opts)
    alpha = check_alpha(alpha)
    if not PiB_mass > 0:
        raise InvalidConditioningError("prior mass of B is zero")
    Qm, w = _weighted_atoms(B_atoms)
    sups = testing_power_at(P0, V, Qm, alpha, opts)
    return np.exp(_log_bound(sups, w, np.log(PiB_mass), alpha, ns))


def ht_bound_iid(P0, V, B_atoms, PiB_mass, n, alpha="optimize", opts=None,
                 return_alpha=False):
    """Test-error bound ``PiB^-a sum_Q [sup_lam P0 (p_lam/q)^a]^n Pi(Q|B)``.

    Parameters
    ----------
    P0 : GridDensity
    V : sequence of GridDensity or ndarray
    B_atoms : DiscretePrior-like or (densities, masses)
        The prior conditioned on ``B``; masses sum to one.
    PiB_mass : float
        Unconditional prior mass of ``B``.
    n : int
    alpha : float or "optimize"
        With ``"optimize"`` the bound is minimized over ``alpha`` (the
        logarithm of the bound is convex in ``alpha``).
    return_alpha : bool
        Also return the ``alpha`` used.

    Raises
    ------
    InvalidConditioningError
        If ``PiB_mass`` is zero.
    """
    opts = SolverOptions.coerce(opts)
    if not PiB_mass > 0:
        raise InvalidConditioningError("prior mass of B is zero")
    if PiB_mass > 1 + 1e-12:
        raise ValueError("PiB_mass must not exceed one")
    n = int(n)
    Qm, w = _weighted_atoms(B_atoms)
    p0, Vm, Qm, mu = _unpack(P0, V, Qm)
    log_pib = np.log(PiB_mass)

    def log_value(a):
        sups = _inner_sup(a, p0, Vm, Qm, mu, opts).upper
        return float(_log_bound(sups, w, log_pib, a, [n])[0])

    if alpha == "optimize":
        cands = [(log_value(0.0), 0.0), (log_value(1.0), 1.0)]
        x, fx, _ = golden_section(log_value, 0.0, 1.0, tol=opts.alpha_tol)
        cands.append((fx, x))
        lv, a = min(cands, key=lambda t: (t[0], t[1]))
    else:
        a = check_alpha(alpha)
        lv = log_value(a)
    val = float(np.exp(lv))
    return (val, a) if return_alpha else val
