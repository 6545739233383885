"""Small optimizers used by the transforms.

``golden_section`` minimizes a unimodal scalar function.  ``frank_wolfe``
maximizes, row by row, separable concave objectives of a mixture

    F_r(lam) = sum_x W[r, x] h((lam_r @ P)[x])

over the probability simplex, using away steps and an exact (safeguarded
Newton) line search.  ``F + gap`` is a certified upper bound on the maximum
for concave objectives, and the best such bound seen is returned.
"""

from dataclasses import dataclass

import numpy as np

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, a, b, tol=1e-6, max_iter=200):
    """Minimize a unimodal function on ``[a, b]``.

    Returns
    -------
    x_best, f_best : float
        Best point among all evaluations (not merely the final bracket).
    n_eval : int
    """
    evals = []

    def ev(x):
        fx = f(x)
        evals.append((fx, x))
        return fx

    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = ev(c), ev(d)
    it = 0
    while (b - a) > tol and it < max_iter:
        it += 1
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = ev(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = ev(d)
    fx, x = min(evals, key=lambda t: (t[0], t[1]))
    return x, fx, len(evals)


@dataclass(frozen=True)
class ConcaveProfile:
    """Scalar concave function with first and second derivatives."""

    h: object
    dh: object
    d2h: object


def power_profile(alpha):
    a = float(alpha)
    return ConcaveProfile(
        h=lambda p: p ** a,
        dh=lambda p: a * p ** (a - 1.0),
        d2h=lambda p: a * (a - 1.0) * p ** (a - 2.0),
    )


def log_profile():
    return ConcaveProfile(
        h=np.log,
        dh=lambda p: 1.0 / p,
        d2h=lambda p: -1.0 / (p * p),
    )


@dataclass
class FWResult:
    lam: np.ndarray
    value: np.ndarray
    upper: np.ndarray
    gap: np.ndarray
    converged: np.ndarray
    iterations: int


def _masked(W, vals):
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        out = W * vals
    return np.where(W > 0, out, 0.0)


def _objective(W, prof, p):
    with np.errstate(divide="ignore", invalid="ignore"):
        hv = prof.h(p)
    return _masked(W, hv).sum(axis=1)


def _gradient(W, prof, p, P):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        dv = prof.dh(p)
    D = _masked(W, dv)
    inf = np.isinf(D)
    G = np.where(inf, 0.0, D) @ P.T
    if inf.any():
        hit = (inf.astype(float) @ (P.T > 0).astype(float)) > 0
        G[hit] = np.inf
    return G


def _dir_derivs(W, prof, p, dp, g):
    x = np.maximum(p + g[:, None] * dp, 0.0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        d1 = _masked(W, prof.dh(x) * dp)
        d2 = _masked(W, prof.d2h(x) * dp * dp)
    # cells with dp == 0 contribute nothing even where dh is infinite
    d1 = np.where(dp == 0, 0.0, d1)
    d2 = np.where(dp == 0, 0.0, d2)
    return np.nan_to_num(d1.sum(axis=1), nan=-np.inf), d2.sum(axis=1)


def _line_search(W, prof, p, dp, gmax, iters=60):
    """Maximize the concave map g -> F(p + g dp) on [0, gmax] row-wise."""
    gamma = gmax.copy()
    d_hi, _ = _dir_derivs(W, prof, p, dp, gmax)
    idx = np.flatnonzero(~(d_hi >= 0))
    if idx.size == 0:
        return gamma
    W, p, dp = W[idx], p[idx], dp[idx]
    lo = np.zeros(idx.size)
    hi = gmax[idx].copy()
    scale = hi.copy()
    g = 0.5 * hi
    for _ in range(iters):
        d1, d2 = _dir_derivs(W, prof, p, dp, g)
        lo = np.where(d1 > 0, g, lo)
        hi = np.where(d1 <= 0, g, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = g - d1 / d2
        ok = np.isfinite(newton) & (newton > lo) & (newton < hi)
        g_new = np.where(ok, newton, 0.5 * (lo + hi))
        step = np.abs(g_new - g)
        g = g_new
        if np.all((step <= 1e-15 * scale) | (hi - lo <= 1e-13 * scale)):
            break
    gamma[idx] = g
    return gamma


def frank_wolfe(P, W, prof, lam0=None, tol=1e-8, max_iter=500):
    """Row-wise simplex maximization of ``sum_x W[r,x] h((lam @ P)[x])``.

    Parameters
    ----------
    P : ndarray, shape (m, k)
        Vertices (component densities).
    W : ndarray, shape (b, k)
        Nonnegative cell weights, one row per problem.
    prof : ConcaveProfile
    lam0 : ndarray, shape (b, m), optional
        Starting weights; uniform when omitted.
    tol : float
        Duality-gap stopping threshold.
    max_iter : int

    Returns
    -------
    FWResult
        ``upper`` is the smallest ``value + gap`` encountered, an upper
        bound on each row maximum.
    """
    P = np.asarray(P, dtype=float)
    W = np.asarray(W, dtype=float)
    b, m = W.shape[0], P.shape[0]
    if lam0 is None:
        lam = np.full((b, m), 1.0 / m)
    else:
        lam = np.array(lam0, dtype=float, copy=True)
    rows = np.arange(b)
    upper = np.full(b, np.inf)
    best_val = np.full(b, -np.inf)
    best_lam = lam.copy()
    it = 0
    while True:
        p = lam @ P
        F = _objective(W, prof, p)
        G = _gradient(W, prof, p, P)
        gl = np.where(lam > 0, G * np.where(lam > 0, lam, 0.0), 0.0).sum(axis=1)
        s = np.argmax(G, axis=1)
        gap = G[rows, s] - gl
        gap = np.where(np.isnan(gap), np.inf, gap)
        upper = np.minimum(upper, F + gap)
        improved = F > best_val
        best_val = np.where(improved, F, best_val)
        best_lam[improved] = lam[improved]
        active = gap > tol
        if not active.any() or it >= max_iter:
            break
        it += 1
        Gm = np.where(lam > 0, G, np.inf)
        a = np.argmin(Gm, axis=1)
        away_gap = gl - G[rows, a]
        lam_a = lam[rows, a]
        use_fw = (gap >= away_gap) | (lam_a >= 1.0)
        dlam = np.where(use_fw[:, None], -lam, lam)
        dlam[rows[use_fw], s[use_fw]] += 1.0
        dlam[rows[~use_fw], a[~use_fw]] -= 1.0
        with np.errstate(divide="ignore"):
            gmax = np.where(use_fw, 1.0, lam_a / (1.0 - lam_a))
        ai = np.flatnonzero(active)
        gamma = np.zeros(b)
        gamma[ai] = _line_search(W[ai], prof, p[ai], dlam[ai] @ P, gmax[ai])
        new = lam + gamma[:, None] * dlam
        drop = (~use_fw) & (gamma >= gmax)
        new[rows[drop], a[drop]] = 0.0
        new = np.maximum(new, 0.0)
        lam = new / new.sum(axis=1, keepdims=True)
    converged = ~(gap > tol)
    return FWResult(best_lam, best_val, np.maximum(upper, best_val), gap, converged, it)
