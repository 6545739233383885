"""Turn an :class:`ExperimentConfig` into a runnable scenario."""

from dataclasses import dataclass, field

import numpy as np

from ..bayes import DiscretePrior, domination_check, kl_prior_check, net_prior
from ..certify import (
    certify_marginal,
    certify_metric_ball,
    certify_schwartz,
    theta_target,
)
from ..exceptions import ConfigurationError
from ..measures import GridDensity, pairwise_divergence
from ..scenarios import (
    build_bernoulli,
    build_fixed_width,
    build_mixture,
    build_support_boundary,
    support_boundary_B,
    verify_lower_mass,
)
from ..transforms import SolverOptions, ht_bound_curve

__all__ = ["Scenario", "build_scenario", "certificate_bound"]

_G_BASES = {"uniform": lambda u: np.ones_like(u)}


@dataclass
class Scenario:
    """A prior, a true law and a target set, ready for simulation.

    Attributes
    ----------
    scenario_id : str
    kind : str
    prior : DiscretePrior
    P0 : GridDensity
    target : ndarray of bool
        Atoms forming the target set.
    target_label : str
    model : object
        The underlying scenario model.
    theta : ndarray or None
        Parameter of interest per atom, where the model has one.
    theta0 : ndarray or None
    """

    scenario_id: str
    kind: str
    prior: DiscretePrior
    P0: GridDensity
    target: np.ndarray
    target_label: str
    model: object = None
    theta: np.ndarray = None
    theta0: np.ndarray = None
    settings: dict = field(default_factory=dict)

    def certify(self, opts=None):
        """Run the scenario's certificate (see :func:`build_scenario`)."""
        return _CERTIFIERS[self.kind](self, self.settings.get("certificate", {}), opts)


def _g(name):
    try:
        return _G_BASES[name]
    except KeyError:
        raise ConfigurationError(f"unknown base density {name!r}") from None


def _bernoulli(sc, prior_cfg):
    model = build_bernoulli(sc.get("mesh", 0.01), sc.get("theta0", 0.3))
    family = DiscretePrior(model.grid, model.densities,
                           np.full(model.thetas.size, 1.0 / model.thetas.size),
                           tuple(model.thetas.tolist()))
    kind = prior_cfg.get("kind", "net")
    if kind == "uniform":
        prior = family
    elif kind == "net":
        eta = prior_cfg.get("eta", [2.0 ** -k for k in range(1, 8)])
        lam = prior_cfg.get("lam", [2.0 ** -k for k in range(1, 7)] + [2.0 ** -6])
        net = net_prior(family, prior_cfg.get("metric", "hellinger"), eta, lam)
        a = float(prior_cfg.get("p0_mass", 0.5))
        if not 0 <= a <= 1:
            raise ConfigurationError("p0_mass must lie in [0, 1]")
        w = (1.0 - a) * net.masses
        w[model.p0_index] += a
        prior = net.with_masses(w / w.sum())
    else:
        raise ConfigurationError(f"unknown bernoulli prior kind {kind!r}")
    return model, prior, model.P0, model.thetas, np.array([model.theta0])


def _fixed_width(sc, prior_cfg):
    model = build_fixed_width(
        sc.get("theta_lo", -0.6), sc.get("theta_hi", 0.6), sc.get("theta_step", 0.04),
        sc.get("theta0", 0.0), sc.get("epsilon", 0.2), _g(sc.get("g", "uniform")),
        sc.get("M", 1.0), sc.get("J", 50), sc.get("nuisance_draws", 10), sc.get("seed", 7),
        data_step=sc.get("data_step"))
    return model, model.prior, model.P0, model.theta, np.array([model.theta0])


def _support_boundary(sc, prior_cfg):
    model = build_support_boundary(
        sc.get("sigma", 2.0), _g(sc.get("g", "uniform")), sc.get("M", 1.0), sc.get("J", 50),
        sc.get("theta_mesh", 0.1), sc.get("nuisance_draws", 8), sc.get("seed", 11),
        theta0=tuple(sc.get("theta0", (0.0, 1.5))), theta_radius=sc.get("theta_radius", 0.5),
        data_step=sc.get("data_step"))
    return model, model.prior, model.P0, model.theta, model.theta0


def _mixture(sc, prior_cfg):
    keys = ("scale", "latent_range", "x_range", "x_step", "latent_points", "concentration")
    params = {k: sc[k] for k in keys if k in sc}
    model = build_mixture(sc["kind"], params, sc.get("truncation", 20), sc.get("draws", 100),
                          sc.get("seed", 3))
    return model, model.prior, model.prior.atom(model.p0_index), None, None


_BUILDERS = {
    "bernoulli": _bernoulli,
    "fixed_width": _fixed_width,
    "support_boundary": _support_boundary,
    "normal_location": _mixture,
    "uniform_scale": _mixture,
}


def _target(tcfg, prior, P0, theta, theta0):
    kind = tcfg["kind"]
    if kind == "hellinger_complement":
        r = float(tcfg["radius"])
        H = pairwise_divergence("hellinger", P0.values[None, :], prior.densities,
                                prior.grid.cell_mass)[0]
        return H > r, f"H(P, P0) > {r!r}"
    if kind == "theta_complement":
        if theta is None:
            raise ConfigurationError("this scenario has no parameter of interest")
        eps = float(tcfg["epsilon"])
        metric = tcfg.get("metric", "max")
        return theta_target(theta, theta0, eps, metric), f"{metric} |theta - theta0| > {eps!r}"
    idx = np.asarray(tcfg["atoms"], dtype=np.int64)
    mask = np.zeros(prior.size, dtype=bool)
    mask[idx] = True
    return mask, f"atoms {idx.tolist()}"


def build_scenario(cfg):
    """Construct the scenario described by ``cfg``.

    Certificates by scenario kind:

    * ``bernoulli``: ``schwartz`` (default) or ``hellinger_ball``.
    * ``fixed_width``: marginal certificate with the model's ``B_+``/``B_-``
      bands, plus the Kullback-Leibler prior check for contrast.
    * ``support_boundary``: marginal certificate with the ratio-ball ``B``.
    * mixtures: Hellinger-ball certificate.
    """
    sc = dict(cfg.scenario)
    model, prior, P0, theta, theta0 = _BUILDERS[sc["kind"]](sc, cfg.prior)
    target, label = _target(cfg.target, prior, P0, theta, theta0)
    return Scenario(cfg.scenario_id, sc["kind"], prior, P0, target, label, model,
                    theta, theta0, {"certificate": dict(cfg.certificate),
                                    "target": dict(cfg.target)})


# ------------------------------------------------------------- certifiers


def _cert_bernoulli(s, c, opts):
    eps = float(c.get("epsilon", 0.1))
    if c.get("theorem", "schwartz") == "schwartz":
        return certify_schwartz(s.P0, s.prior, eps, opts=opts)
    return certify_metric_ball(s.P0, s.prior, eps, opts=opts)


def _cert_fixed_width(s, c, opts):
    m = s.model
    eps = float(c.get("epsilon", m.epsilon))
    f = float(m.f_profile(eps))
    cert = certify_marginal(s.P0, s.prior, s.theta, s.theta0, eps,
                            B_pieces={"+": m.B_plus, "-": m.B_minus}, f_value=f, opts=opts)
    cert.details["kl_prior"] = kl_prior_check(s.P0, s.prior, 10.0 ** -np.arange(0, 9))
    cert.details["f"] = f
    return cert


def _cert_support_boundary(s, c, opts):
    m = s.model
    eps = float(c.get("epsilon", 0.2))
    ball = support_boundary_B(m, eps, c.get("s", 2.0))
    cert = certify_marginal(s.P0, s.prior, s.theta, s.theta0, eps, B=ball["B"],
                            f_value=ball["f"], metric=c.get("metric", "euclidean"), opts=opts)
    cert.details.update(f=ball["f"], ratio_ball=ball,
                        lower_mass=verify_lower_mass(m, np.linspace(0.01, 0.5, 50)))
    return cert


def _cert_mixture(s, c, opts):
    eps = float(c.get("epsilon", 0.15))
    ep = c.get("eps_prime", "auto" if s.kind == "uniform_scale" else None)
    return certify_metric_ball(s.P0, s.prior, eps, r=c.get("r", 2.0), eps_prime=ep, opts=opts)


_CERTIFIERS = {
    "bernoulli": _cert_bernoulli,
    "fixed_width": _cert_fixed_width,
    "support_boundary": _cert_support_boundary,
    "normal_location": _cert_mixture,
    "uniform_scale": _cert_mixture,
}


def certificate_bound(scenario, cert, ns, opts=None):
    """Bound on ``E Pi(target | X_1..X_n)`` from a passing certificate.

    Sums :func:`ht_bound_iid` over the cover pieces at each piece's
    ``alpha_star``.  Returns NaN everywhere when the certificate failed or
    its cover does not contain the target set.
    """
    ns = np.asarray(ns, dtype=np.int64)
    out = np.full(ns.size, np.nan)
    if cert is None or not cert.passed:
        return out
    covered = np.zeros(scenario.prior.size, dtype=bool)
    for p in cert.cover.pieces:
        covered[p] = True
    if np.any(scenario.target & ~covered):
        return out
    opts = SolverOptions.coerce(opts)
    D, w = scenario.prior.densities, scenario.prior.masses
    total = np.zeros(ns.size)
    for rec in cert.pieces:
        wb = w[rec.B] / w[rec.B].sum()
        total += ht_bound_curve(scenario.P0, D[rec.atoms], (D[rec.B], wb), rec.prior_mass_B,
                                ns, rec.alpha_star, opts)
    return total


def scenario_domination(scenario):
    return domination_check(scenario.P0, scenario.prior)
