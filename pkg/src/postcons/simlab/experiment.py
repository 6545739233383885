"""Seeded replications of the posterior along a sample-size schedule."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.special import logsumexp

from ..bayes import PosteriorState, log_posterior_mass, posterior_update
from ..exceptions import DegenerateInputError, IllDefinedPosteriorError
from ..measures import sample
from ..rng import make_generator, replication_seed
from .factory import build_scenario, certificate_bound, scenario_domination

__all__ = ["Trajectory", "ExperimentResult", "DecayFit", "run_replication",
           "run_experiment", "decay_fit", "LOG_FLOOR"]

#: masses below this are treated as exact zeros in fits and log plots
MASS_FLOOR = 1e-300
LOG_FLOOR = float(np.log(MASS_FLOOR))


@dataclass(frozen=True)
class Trajectory:
    """One replication along the schedule.

    Attributes
    ----------
    replication : int
    seed : int
        Seed of the replication stream; ``make_generator(seed)`` replays it.
    ns : tuple of int
    target_mass, log_target_mass : ndarray
        NaN after a breach of domination.
    predictive_loglik : ndarray
        Log prior-predictive density of the data seen so far.
    domination_ok : ndarray of bool
    breach : int or None
        Sample size at which the posterior became ill defined.
    """

    replication: int
    seed: int
    ns: tuple
    target_mass: np.ndarray
    log_target_mass: np.ndarray
    predictive_loglik: np.ndarray
    domination_ok: np.ndarray
    breach: int = None


def run_replication(prior, P0, target, ns, seed, replication=0):
    """Posterior mass of ``target`` after each ``n`` in ``ns``.

    Data are drawn i.i.d. from ``P0`` from the stream ``make_generator(seed)``
    and the posterior is updated incrementally.
    """
    ns = tuple(int(n) for n in ns)
    rng = make_generator(seed)
    x = sample(P0, ns[-1], rng)
    k = len(ns)
    lm = np.full(k, np.nan)
    ll = np.full(k, np.nan)
    ok = np.zeros(k, dtype=bool)
    state = PosteriorState.initial(prior)
    breach, prev = None, 0
    for j, n in enumerate(ns):
        try:
            state = posterior_update(state, x[prev:n])
        except IllDefinedPosteriorError as e:
            breach = e.n_observed
            break
        prev = n
        lm[j] = log_posterior_mass(state, target)
        ll[j] = float(logsumexp(state.log_weights))
        ok[j] = True
    with np.errstate(over="ignore"):
        mass = np.exp(lm)
    return Trajectory(replication, int(seed), ns, mass, lm, ll, ok, breach)


def _replicate(prior, P0, target, ns, master_seed, rep):
    return run_replication(prior, P0, target, ns, replication_seed(master_seed, rep), rep)


@dataclass
class ExperimentResult:
    """Trajectories of one experiment with its certificate.

    Attributes
    ----------
    config : ExperimentConfig
    scenario : Scenario
    trajectories : list of Trajectory
        Ordered by replication.
    certificate : Certificate or None
    bound : ndarray
        Certificate bound on the expected target mass per ``n`` (NaN when
        unavailable).
    domination : DominationReport
    notes : list of str
    """

    config: object
    scenario: object
    trajectories: list
    certificate: object
    bound: np.ndarray
    domination: object
    notes: list = field(default_factory=list)

    @property
    def ns(self):
        return np.asarray(self.config.n_schedule)

    @property
    def masses(self):
        """Target masses, shape ``(replications, len(ns))``."""
        return np.vstack([t.target_mass for t in self.trajectories])

    @property
    def breaches(self):
        return sum(t.breach is not None for t in self.trajectories)

    def rows(self):
        """Table rows in CSV column order."""
        sid = self.config.scenario_id
        for t in self.trajectories:
            for j, n in enumerate(t.ns):
                yield (sid, t.replication, t.seed, n, float(t.target_mass[j]),
                       float(t.log_target_mass[j]), float(self.bound[j]),
                       bool(t.domination_ok[j]))


def run_experiment(cfg, workers=None, replications=None, master_seed=None, certify=True,
                   opts=None):
    """Certify the scenario, then simulate every replication.

    Parameters
    ----------
    cfg : ExperimentConfig
    workers : int, optional
        Worker processes (defaults to ``cfg.workers``).  The output does not
        depend on this value.
    replications, master_seed : int, optional
        Overrides of the configured values.
    certify : bool
        Run the certificate first (also requires it enabled in ``cfg``).

    Returns
    -------
    ExperimentResult
    """
    if replications is not None:
        cfg = cfg.replace(replications=int(replications))
    if master_seed is not None:
        cfg = cfg.replace(master_seed=int(master_seed))
    scenario = build_scenario(cfg)
    cert = scenario.certify(opts) if (certify and cfg.certificate_enabled) else None
    bound = certificate_bound(scenario, cert, cfg.n_schedule, opts)
    dom = cert.domination if cert is not None and cert.domination is not None \
        else scenario_domination(scenario)
    work = partial(_replicate, scenario.prior, scenario.P0, scenario.target, cfg.n_schedule,
                   cfg.master_seed)
    reps = range(cfg.replications)
    workers = cfg.workers if workers is None else int(workers)
    workers = max(1, min(workers, cfg.replications))
    if workers == 1:
        trajs = [work(r) for r in reps]
    else:
        chunk = max(1, cfg.replications // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as ex:
            trajs = list(ex.map(work, reps, chunksize=chunk))
    res = ExperimentResult(cfg, scenario, trajs, cert, bound, dom)
    if res.breaches:
        res.notes.append(f"{res.breaches} replication(s) hit an ill-defined posterior")
    return res


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of ``log(mass)`` against ``n``.

    Attributes
    ----------
    slope, intercept : float
        ``slope`` is ``-inf`` when every mass is zero.
    n_points : int
        Schedule points used (those with positive mass).
    zero_fraction : float
        Fraction of exactly-zero masses among all inputs.
    note : str
    """

    slope: float
    intercept: float
    n_points: int
    zero_fraction: float
    note: str = ""


def decay_fit(masses, ns, statistic="median"):
    """Exponential decay rate of target masses along the schedule.

    Parameters
    ----------
    masses : array_like, shape (len(ns),) or (replications, len(ns))
        Several replications are first reduced by ``statistic``
        (``"median"`` or ``"mean"``) per ``n``; NaN entries are ignored.
    ns : array_like of int

    Raises
    ------
    DegenerateInputError
        When fewer than three points have positive mass but not all masses
        are zero.
    """
    m = np.atleast_2d(np.asarray(masses, dtype=float))
    ns = np.asarray(ns, dtype=float)
    if m.shape[1] != ns.size:
        raise ValueError("masses and ns disagree in length")
    finite = m[np.isfinite(m)]
    zf = float(np.mean(finite <= 0)) if finite.size else 1.0
    reduce = {"median": np.nanmedian, "mean": np.nanmean}[statistic]
    with np.errstate(all="ignore"):
        y = reduce(m, axis=0) if m.shape[0] > 1 else m[0]
    pos = np.isfinite(y) & (y > MASS_FLOOR)
    if not pos.any():
        return DecayFit(-np.inf, np.nan, 0, zf, "all masses are zero")
    if pos.sum() < 3:
        raise DegenerateInputError("need at least three schedule points with positive mass")
    slope, intercept = np.polyfit(ns[pos], np.log(y[pos]), 1)
    note = "" if pos.all() else f"{int((~pos).sum())} censored point(s) at the mass floor"
    return DecayFit(float(slope), float(intercept), int(pos.sum()), zf, note)
