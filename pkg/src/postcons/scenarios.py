"""Concrete models on finite grids.

* Bernoulli family on a probability mesh.
* Support-boundary model: densities ``eta((x - t1)/(t2 - t1))/(t2 - t1)`` on
  ``[t1, t2]`` with nuisance ``eta`` drawn as Esscher transforms
  ``g e^Z / int g e^Z`` of a reflected random walk ``Z``.
* Fixed-width variant: densities ``eta(x - t)`` on ``[t, t + 1]``.
* Stick-breaking mixtures of normal-location or uniform-scale kernels.

All nuisance densities live on ``J`` equal cells of ``[0, 1]`` and are
piecewise constant there, so their CDFs are piecewise linear and data-cell
probabilities are exact CDF differences.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .bayes import DiscretePrior, stick_breaking_prior
from .exceptions import ConfigurationError, DegenerateInputError
from .measures import DominatingGrid, GridDensity, pairwise_divergence
from .rng import make_generator

__all__ = [
    "BernoulliModel",
    "SupportBoundaryModel",
    "FixedWidthModel",
    "MixtureModel",
    "LowerMassReport",
    "build_bernoulli",
    "esscher_atoms",
    "reflect",
    "lower_mass_profile",
    "build_support_boundary",
    "verify_lower_mass",
    "build_fixed_width",
    "build_mixture",
    "export_density_table",
    "support_boundary_B",
]

_EDGE_TOL = 1e-9


# ------------------------------------------------------------- bernoulli


@dataclass
class BernoulliModel:
    grid: DominatingGrid
    thetas: np.ndarray
    densities: np.ndarray
    theta0: float
    p0_index: int

    @property
    def P0(self):
        return GridDensity(self.grid, self.densities[self.p0_index])


def build_bernoulli(mesh=0.01, theta0=0.3):
    """Bernoulli family ``{(t, 1 - t) : t = mesh, 2 mesh, ..., 1 - mesh}``."""
    n = int(round(1.0 / mesh))
    if abs(n * mesh - 1.0) > 1e-9 or n < 2:
        raise ConfigurationError("mesh must divide one")
    thetas = np.arange(1, n) / n
    j = int(np.argmin(np.abs(thetas - theta0)))
    if abs(thetas[j] - theta0) > 1e-9:
        raise ConfigurationError("theta0 must lie on the mesh")
    grid = DominatingGrid.uniform(2)
    D = np.column_stack([thetas, 1.0 - thetas])
    return BernoulliModel(grid, thetas, D, float(thetas[j]), j)


# ------------------------------------------------------------- nuisance


def reflect(z, M):
    """Fold values into ``[-M, M]`` by reflection at both barriers."""
    y = np.mod(np.asarray(z, dtype=float) + M, 4.0 * M)
    y = np.where(y > 2.0 * M, 4.0 * M - y, y)
    return y - M


def _cell_values(g, J):
    """Base density ``g`` averaged over ``J`` equal cells, normalized."""
    if callable(g):
        u = (np.arange(J) + 0.5) / J
        vals = np.asarray(g(u), dtype=float) * np.ones(J)
    else:
        vals = np.asarray(g, dtype=float)
        if vals.shape != (J,):
            raise ConfigurationError("g needs one value per nuisance cell")
    if np.any(vals <= 0):
        raise ConfigurationError("g must be positive on (0, 1)")
    return vals / vals.mean()


def esscher_atoms(g_cells, M, n_draws, rng):
    """Nuisance densities ``g e^Z / mean(g e^Z)`` on ``J`` cells.

    ``Z = U + W`` with ``U ~ U[-M, M]`` and ``W`` a ``J``-step random walk of
    step variance ``1/J`` started at zero, reflected into ``[-M, M]``.
    """
    J = g_cells.size
    U = rng.uniform(-M, M, size=n_draws)
    steps = rng.normal(0.0, np.sqrt(1.0 / J), size=(n_draws, J))
    steps[:, 0] = 0.0
    Z = reflect(U[:, None] + np.cumsum(steps, axis=1), M)
    eta = g_cells[None, :] * np.exp(Z)
    return eta / eta.mean(axis=1, keepdims=True)


def _cdf_knots(eta):
    J = eta.shape[-1]
    c = np.concatenate([np.zeros(eta.shape[:-1] + (1,)), np.cumsum(eta, axis=-1) / J], axis=-1)
    return c / c[..., -1:]


def lower_mass_profile(g_cells, M):
    """``f(eps) = e^{-2M} min{G(eps), 1 - G(1 - eps)}`` for the cell base ``g``."""
    J = g_cells.size
    knots = np.linspace(0.0, 1.0, J + 1)
    G = _cdf_knots(g_cells)

    def f(eps):
        e = np.asarray(eps, dtype=float)
        lo = np.interp(e, knots, G)
        hi = 1.0 - np.interp(1.0 - e, knots, G)
        return np.exp(-2.0 * M) * np.minimum(lo, hi)

    return f


def _interval_probs(edges, lo, hi, eta):
    """Cell probabilities of ``eta`` rescaled to ``[lo, hi]``.

    Parameters
    ----------
    edges : ndarray, shape (k + 1,)
    lo, hi : ndarray, shape (m,)
    eta : ndarray, shape (m, J)
    """
    J = eta.shape[1]
    knots = np.linspace(0.0, 1.0, J + 1)
    cdf = _cdf_knots(eta)
    w = (hi - lo)[:, None]
    u = np.clip((edges[None, :] - lo[:, None]) / w, 0.0, 1.0)
    F = np.empty_like(u)
    for i in range(eta.shape[0]):
        F[i] = np.interp(u[i], knots, cdf[i])
    return np.maximum(np.diff(F, axis=1), 0.0)


def _check_aligned(values, edges):
    pos = np.searchsorted(edges, values)
    pos = np.clip(pos, 0, edges.size - 1)
    near = np.minimum(np.abs(edges[pos] - values), np.abs(edges[np.maximum(pos - 1, 0)] - values))
    if np.any(near > _EDGE_TOL):
        raise ConfigurationError("the data grid must refine the theta mesh")


def _mesh(lo, hi, step):
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


# -------------------------------------------------------- support boundary


@dataclass
class SupportBoundaryModel:
    """Semi-parametric support-boundary model on a finite grid.

    Attributes
    ----------
    grid : DominatingGrid
        Data cells.
    edges : ndarray
        Data cell edges.
    theta_grid : ndarray, shape (t, 2)
        Feasible ``(theta1, theta2)`` mesh pairs.
    sigma, M : float
    g_cells : ndarray, shape (J,)
    nuisance_atoms : ndarray, shape (n_eta, J)
    eta0 : ndarray, shape (J,)
    prior : DiscretePrior
        Product prior, labels ``(theta_index, eta_index)``.
    theta : ndarray, shape (m, 2)
        Parameter of interest per prior atom.
    theta0 : ndarray, shape (2,)
    p0_index : int
        Atom equal to ``P0``.
    """

    grid: DominatingGrid
    edges: np.ndarray
    theta_grid: np.ndarray
    sigma: float
    M: float
    g_cells: np.ndarray
    nuisance_atoms: np.ndarray
    eta0: np.ndarray
    prior: DiscretePrior
    theta: np.ndarray
    theta0: np.ndarray
    p0_index: int

    @property
    def J(self):
        return self.g_cells.size

    @property
    def P0(self):
        return self.prior.atom(self.p0_index)

    def f_profile(self, eps):
        return lower_mass_profile(self.g_cells, self.M)(eps)


def build_support_boundary(sigma, g, M, J, theta_mesh, n_nuisance_draws, seed,
                           theta0=(0.0, 1.5), theta_radius=0.5, data_step=None):
    """Support-boundary model with an Esscher/reflected-walk nuisance prior.

    Parameters
    ----------
    sigma : float
        Upper bound on the support width.
    g : callable or array
        Base density on ``[0, 1]`` (evaluated at cell midpoints).
    M : float
        Bound on ``|Z|``.
    J : int
        Number of nuisance cells.
    theta_mesh : float
        Spacing of both ``theta1`` and ``theta2`` meshes.
    n_nuisance_draws : int
    seed : int or Generator
    theta0 : pair
        True support endpoints; must lie on the mesh.
    theta_radius : float
        Half-width of the mesh window around each true endpoint.
    data_step : float, optional
        Data cell width; defaults to ``theta_mesh / 5``.

    Notes
    -----
    ``eta0`` is the first nuisance draw, so ``P0`` is itself a prior atom.
    """
    if not (sigma > 0 and M > 0):
        raise ConfigurationError("sigma and M must be positive")
    rng = make_generator(seed)
    g_cells = _cell_values(g, int(J))
    eta = esscher_atoms(g_cells, M, int(n_nuisance_draws), rng)
    t0 = np.asarray(theta0, dtype=float)
    if not 0 < t0[1] - t0[0] < sigma:
        raise ConfigurationError("theta0 must satisfy 0 < theta2 - theta1 < sigma")
    m1 = t0[0] + _mesh(-theta_radius, theta_radius, theta_mesh)
    m2 = t0[1] + _mesh(-theta_radius, theta_radius, theta_mesh)
    pairs = np.array([(a, b) for a in m1 for b in m2 if 0 < b - a < sigma])
    if pairs.size == 0:
        raise ConfigurationError("the theta mesh has no feasible pair")
    h = theta_mesh / 5.0 if data_step is None else float(data_step)
    edges = _mesh(m1[0], m2[-1], h)
    _check_aligned(np.concatenate([m1, m2]), edges)
    grid = DominatingGrid.from_edges(edges)
    T, E = pairs.shape[0], eta.shape[0]
    ti = np.repeat(np.arange(T), E)
    ei = np.tile(np.arange(E), T)
    probs = _interval_probs(edges, pairs[ti, 0], pairs[ti, 1], eta[ei])
    probs /= probs.sum(axis=1, keepdims=True)
    dens = probs / grid.cell_mass[None, :]
    j0 = int(np.argmin(np.abs(pairs - t0).sum(axis=1)))
    if np.abs(pairs[j0] - t0).sum() > 1e-9:
        raise ConfigurationError("theta0 is not on the mesh")
    p0_index = j0 * E
    labels = tuple(zip(ti.tolist(), ei.tolist()))
    prior = DiscretePrior(grid, dens, np.full(T * E, 1.0 / (T * E)), labels, "product",
                          {"sigma": sigma, "M": M, "J": int(J)})
    return SupportBoundaryModel(grid, edges, pairs, float(sigma), float(M), g_cells, eta,
                                eta[0].copy(), prior, pairs[ti], t0, p0_index)


@dataclass(frozen=True)
class LowerMassReport:
    passed: bool
    worst_slack: float
    worst_atom: int
    worst_eps: float
    violation: tuple = None


def verify_lower_mass(model, eps_grid, atoms=None):
    """Check ``min{int_0^eps eta, int_{1-eps}^1 eta} >= f(eps)`` on every atom.

    Parameters
    ----------
    model : SupportBoundaryModel or FixedWidthModel
    eps_grid : sequence of float
        Values in ``(0, 1/2]``.
    atoms : ndarray, optional
        Nuisance densities to check instead of the model's own.

    Returns
    -------
    LowerMassReport
        ``violation`` names the first ``(atom, eps)`` with negative slack.
    """
    eps = np.asarray(eps_grid, dtype=float)
    if np.any(eps <= 0) or np.any(eps >= 1):
        raise ConfigurationError("eps_grid must lie in (0, 1)")
    eta = model.nuisance_atoms if atoms is None else np.atleast_2d(atoms)
    J = eta.shape[1]
    knots = np.linspace(0.0, 1.0, J + 1)
    cdf = _cdf_knots(eta)
    f = model.f_profile(eps)
    slack = np.empty((eta.shape[0], eps.size))
    for i in range(eta.shape[0]):
        lo = np.interp(eps, knots, cdf[i])
        hi = 1.0 - np.interp(1.0 - eps, knots, cdf[i])
        slack[i] = np.minimum(lo, hi) - f
    i, j = np.unravel_index(int(np.argmin(slack)), slack.shape)
    worst = float(slack[i, j])
    violation = None
    if worst < -1e-12:
        bad = np.argwhere(slack < -1e-12)[0]
        violation = (int(bad[0]), float(eps[bad[1]]))
    return LowerMassReport(violation is None, worst, int(i), float(eps[j]), violation)


# ------------------------------------------------------------ fixed width


@dataclass
class FixedWidthModel:
    """Unit-width location model with nuisance shapes.

    ``V_plus``/``V_minus`` and ``B_plus``/``B_minus`` are atom-index arrays
    for ``theta > theta0 + eps``, ``theta < theta0 - eps`` and the bands
    ``theta0 + eps/2 < theta < theta0 + eps`` (and its mirror).
    """

    grid: DominatingGrid
    edges: np.ndarray
    theta_mesh: np.ndarray
    M: float
    g_cells: np.ndarray
    nuisance_atoms: np.ndarray
    eta0: np.ndarray
    prior: DiscretePrior
    theta: np.ndarray
    theta0: float
    P0: GridDensity
    epsilon: float
    V_plus: np.ndarray
    V_minus: np.ndarray
    B_plus: np.ndarray
    B_minus: np.ndarray

    def f_profile(self, eps):
        return lower_mass_profile(self.g_cells, self.M)(eps)


def build_fixed_width(theta_lo, theta_hi, theta_step, theta0, epsilon, g, M, J,
                      n_nuisance_draws, seed, theta_masses=None, data_step=None):
    """Fixed-width family ``eta(x - theta)`` on ``[theta, theta + 1]``.

    The prior is a product of ``theta_masses`` on the mesh (uniform by
    default) and a uniform law on the nuisance draws.  ``P0`` uses a
    separate nuisance draw ``eta0`` that is not a prior atom, so no atom
    equals ``P0`` while atoms at ``theta0`` still dominate it.

    Raises
    ------
    ConfigurationError
        If a band ``B_+`` or ``B_-`` contains no mesh point (``epsilon``
        below the mesh resolution) or ``theta0`` is off the mesh.
    """
    rng = make_generator(seed)
    g_cells = _cell_values(g, int(J))
    eta_all = esscher_atoms(g_cells, M, int(n_nuisance_draws) + 1, rng)
    eta0, eta = eta_all[0], eta_all[1:]
    mesh = _mesh(theta_lo, theta_hi, theta_step)
    j0 = int(np.argmin(np.abs(mesh - theta0)))
    if abs(mesh[j0] - theta0) > 1e-9:
        raise ConfigurationError("theta0 must lie on the mesh")
    theta0 = float(mesh[j0])
    h = theta_step / 2.0 if data_step is None else float(data_step)
    edges = _mesh(mesh[0], mesh[-1] + 1.0, h)
    _check_aligned(np.concatenate([mesh, mesh + 1.0]), edges)
    grid = DominatingGrid.from_edges(edges)
    T, E = mesh.size, eta.shape[0]
    ti = np.repeat(np.arange(T), E)
    ei = np.tile(np.arange(E), T)
    th = mesh[ti]
    probs = _interval_probs(edges, th, th + 1.0, eta[ei])
    probs /= probs.sum(axis=1, keepdims=True)
    dens = probs / grid.cell_mass[None, :]
    p0p = _interval_probs(edges, np.array([theta0]), np.array([theta0 + 1.0]), eta0[None, :])[0]
    P0 = GridDensity(grid, p0p / p0p.sum() / grid.cell_mass)
    tm = np.full(T, 1.0 / T) if theta_masses is None else np.asarray(theta_masses, float)
    if tm.shape != (T,) or np.any(tm <= 0):
        raise ConfigurationError("theta masses must be positive on the mesh")
    tm = tm / tm.sum()
    masses = tm[ti] / E
    prior = DiscretePrior(grid, dens, masses / masses.sum(), tuple(zip(ti.tolist(), ei.tolist())),
                          "product", {"M": M, "J": int(J)})
    d = th - theta0
    tol = 1e-9
    Bp = np.flatnonzero((d > epsilon / 2 + tol) & (d < epsilon - tol))
    Bm = np.flatnonzero((d < -epsilon / 2 - tol) & (d > -epsilon + tol))
    if Bp.size == 0 or Bm.size == 0:
        raise ConfigurationError("epsilon is below the mesh resolution")
    return FixedWidthModel(grid, edges, mesh, float(M), g_cells, eta, eta0, prior, th, theta0,
                           P0, float(epsilon), np.flatnonzero(d > epsilon + tol),
                           np.flatnonzero(d < -epsilon - tol), Bp, Bm)


# -------------------------------------------------------------- mixtures


@dataclass
class MixtureModel:
    """Stick-breaking mixture family.

    Attributes
    ----------
    kind : str
    grid : DominatingGrid
    kernel : callable
    latent_range : tuple
    prior : DiscretePrior
    hellinger : ndarray
        Pairwise Hellinger distances between atoms.
    L : float
        ``max ||p_F / p_G||_{2,G}`` over atom pairs (``inf`` when some
        atom fails to dominate another).
    p0_index : int
    """

    kind: str
    grid: DominatingGrid
    kernel: object
    latent_range: tuple
    prior: DiscretePrior
    hellinger: np.ndarray
    L: float
    p0_index: int = 0
    params: dict = field(default_factory=dict)

    @property
    def family(self):
        return self.prior.atoms()

    @property
    def P0(self):
        return self.prior.atom(self.p0_index)


def _pairwise_l2_ratio(D, mu):
    m = D.shape[0]
    out = np.empty((m, m))
    for j in range(m):
        q = D[j]
        qpos = q > 0
        gap = np.any(D[:, ~qpos] > 0, axis=1)
        out[:, j] = np.where(gap, np.inf,
                             np.sqrt((D[:, qpos] ** 2 / q[qpos]) @ mu[qpos]))
    return out


def build_mixture(kind, params, truncation, draws, seed):
    """Family of stick-breaking mixtures on a grid.

    Parameters
    ----------
    kind : {"normal_location", "uniform_scale"}
    params : dict
        ``normal_location``: ``scale``, ``latent_range``, ``x_range``,
        ``x_step``, ``latent_points``; ``uniform_scale``: ``latent_range``
        ``(z0, z1)``, ``x_step``, ``latent_points``.  Both accept
        ``concentration`` (default 1).
    truncation : int
    draws : int
    seed : int or Generator
    """
    p = dict(params)
    lo, hi = map(float, p.get("latent_range", (-1.0, 1.0) if kind == "normal_location"
                               else (0.5, 2.0)))
    if not hi > lo:
        raise DegenerateInputError("the latent interval is degenerate")
    nl = int(p.get("latent_points", 201))
    latents = np.linspace(lo, hi, nl)
    base = GridDensity(DominatingGrid(latents), np.full(nl, 1.0 / nl))
    conc = float(p.get("concentration", 1.0))
    if kind == "normal_location":
        scale = float(p.get("scale", 1.0))
        if not scale > 0:
            raise ConfigurationError("scale must be positive")
        x0, x1 = p.get("x_range", (lo - 4 * scale, hi + 4 * scale))
        edges = _mesh(float(x0), float(x1), float(p.get("x_step", 0.05)))
        grid = DominatingGrid.from_edges(edges)

        def kernel(z):
            pr = np.diff(norm.cdf((edges - z) / scale))
            pr = pr / pr.sum()
            return GridDensity(grid, pr / grid.cell_mass)
    elif kind == "uniform_scale":
        if not lo > 0:
            raise ConfigurationError("uniform_scale needs 0 < z0 < z1")
        edges = _mesh(0.0, hi, float(p.get("x_step", 0.02)))
        grid = DominatingGrid.from_edges(edges)

        def kernel(z):
            pr = np.clip(np.minimum(edges[1:], z) - edges[:-1], 0.0, None) / z
            pr = pr / pr.sum()
            return GridDensity(grid, pr / grid.cell_mass)
    else:
        raise ConfigurationError(f"unknown mixture kind {kind!r}")
    prior = stick_breaking_prior(base, conc, truncation, kernel, draws, seed)
    H = pairwise_divergence("hellinger", prior.densities, prior.densities, grid.cell_mass)
    L = float(np.max(_pairwise_l2_ratio(prior.densities, grid.cell_mass)))
    return MixtureModel(kind, grid, kernel, (lo, hi), prior, H, L, 0, p)


def export_density_table(prior, path):
    """Write atom densities as a whitespace-separated table.

    The first row holds grid points, the second the cell masses, and each
    further row ``label mass density...``.
    """
    pts = np.asarray(prior.grid.points).reshape(prior.grid.size, -1)[:, 0]
    with open(path, "w") as fh:
        fh.write("# points " + " ".join(repr(float(v)) for v in pts) + "\n")
        fh.write("# cell_mass " + " ".join(repr(float(v)) for v in prior.grid.cell_mass) + "\n")
        for i in range(prior.size):
            fh.write(f"{i} {float(prior.masses[i])!r} "
                     + " ".join(repr(float(v)) for v in prior.densities[i]) + "\n")


def _ratio_norm(num, q, mu, power):
    """``(sum_{q>0} |num/q|^power q mu)^(1/power)`` row-wise over ``num``."""
    pos = q > 0
    t = np.abs(num[:, pos] / q[pos]) ** power * (q[pos] * mu[pos])
    return t.sum(axis=1) ** (1.0 / power)


def support_boundary_B(model, epsilon, s=2.0):
    """Ratio ball ``B = {Q : P0 << Q, ||dP0/dQ - 1||_{s,Q} < delta}``.

    ``delta = f(epsilon/sigma) / (4K)`` with ``K`` the largest
    ``||dP/dQ||_{r,Q}`` (``1/r + 1/s = 1``, ratios taken on ``{q > 0}``)
    over the model and ``B``.  The ball and ``K`` are shrunk together until
    they are consistent.

    Returns
    -------
    dict
        ``B`` (atom indices), ``delta``, ``K``, ``f`` and ``norms``.
    """
    prior = model.prior
    D, mu, p0 = prior.densities, prior.grid.cell_mass, model.P0.values
    r = np.inf if s == 1.0 else s / (s - 1.0)
    covers = np.all(D[:, p0 > 0] > 0, axis=1)
    norms = np.full(prior.size, np.inf)
    for i in np.flatnonzero(covers):
        norms[i] = _ratio_norm((p0 - D[i])[None, :], D[i], mu, s)[0]
    f = float(model.f_profile(epsilon / model.sigma))

    def K_of(B):
        if r == np.inf:
            return max(float(np.max(D[:, D[j] > 0] / D[j][D[j] > 0])) for j in B)
        return max(float(np.max(_ratio_norm(D, D[j], mu, r))) for j in B)

    B = np.flatnonzero(prior.charged & covers & (norms <= np.min(norms[prior.charged])))
    K = K_of(B)
    delta = f / (4.0 * K)
    while True:
        cand = np.flatnonzero(prior.charged & (norms < delta))
        K_new = K_of(cand) if cand.size else K
        if cand.size == 0 or K_new <= K * (1 + 1e-12):
            B = cand if cand.size else B
            break
        K = K_new
        delta = f / (4.0 * K)
    return {"B": B, "delta": delta, "K": K, "f": f, "norms": norms}
