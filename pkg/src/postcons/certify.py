"""Numerical certificates for the posterior-consistency criteria.

Every certificate works with a prior whose atoms are the model family
(atoms of mass zero belong to the model but are not charged).  A cover of
the target set is a list of atom-index arrays; ``B`` sets are atom-index
arrays as well.  All certificates eventually delegate to
:func:`certify_main`, which checks, piece by piece, that the testing power
is below one, that ``B`` has positive prior mass and that the first moment
``P0(dP/dQ)`` is finite.
"""

from dataclasses import dataclass, field

import numpy as np

from ._optim import golden_section
from .bayes import domination_check, kl_prior_check
from .exceptions import ConfigurationError, OutOfDomainError
from .measures import DivergenceKind, GridDensity, pairwise_divergence, safe_log
from .transforms import (
    SolverOptions,
    _as_matrix,
    _inner_sup,
    hellinger_transform,
    kl_inf_over_hull,
    testing_power,
)

__all__ = [
    "Cover",
    "PieceRecord",
    "Certificate",
    "PI_MARGIN",
    "greedy_ball_cover",
    "moment_table",
    "certify_main",
    "certify_schwartz",
    "certify_kl_consistency",
    "certify_metric_ball",
    "envelope_scan",
    "certify_barron",
    "sigma_schedule",
    "walker_bound",
    "walker_summability",
    "WalkerReport",
    "SummabilityReport",
    "certify_marginal",
    "theta_target",
    "toussaint_check",
]

PI_MARGIN = 1e-6
THETA_TOL = 1e-9


@dataclass(frozen=True)
class Cover:
    """Finite cover of a target set by atom-index pieces."""

    pieces: tuple
    kind: str = "explicit"
    target_predicate: str = ""
    names: tuple = None

    def __post_init__(self):
        pieces = tuple(np.unique(np.asarray(p, dtype=np.int64)) for p in self.pieces)
        object.__setattr__(self, "pieces", pieces)
        if self.names is None:
            object.__setattr__(self, "names", tuple(str(i) for i in range(len(pieces))))

    def __len__(self):
        return len(self.pieces)

    def union(self):
        if not self.pieces:
            return np.zeros(0, np.int64)
        return np.unique(np.concatenate(self.pieces))


@dataclass
class PieceRecord:
    index: int
    name: str
    atoms: np.ndarray
    B: np.ndarray
    prior_mass_B: float
    moment_sup: float
    pi_value: float
    alpha_star: float
    exponent: float
    converged: bool
    mixture_star: np.ndarray = None
    witness_Q: int = None
    notes: list = field(default_factory=list)


@dataclass
class Certificate:
    """Condition report for one theorem.

    Attributes
    ----------
    theorem : str
    pieces : list of PieceRecord
    exponent : float
        ``min_i -log pi_i`` (``inf`` for an empty cover).
    verdict : bool
    failing_condition : str or None
    failing_piece : int or None
    cover : Cover
    candidates_B : list of ndarray
    domination : DominationReport or None
    notes : list of str
    details : dict
    """

    theorem: str
    pieces: list
    exponent: float
    verdict: bool
    failing_condition: str = None
    failing_piece: int = None
    cover: Cover = None
    candidates_B: list = None
    domination: object = None
    notes: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.verdict

    def to_text(self):
        """Structured text report, one record per piece."""
        lines = [f"theorem: {self.theorem}",
                 f"verdict: {'pass' if self.verdict else 'fail'}"]
        if self.failing_condition:
            lines.append(f"failing_condition: {self.failing_condition}"
                         + ("" if self.failing_piece is None else f" (piece {self.failing_piece})"))
        lines.append(f"exponent: {self.exponent!r}")
        if self.domination is not None:
            lines.append(f"domination: holds_for_all_n={self.domination.holds_for_all_n} "
                         f"failing_n={self.domination.failing_n}")
        for p in self.pieces:
            lines.append(
                f"piece i={p.index} name={p.name} atoms={p.atoms.size} pi={p.pi_value!r} "
                f"alpha={p.alpha_star!r} B={p.B.tolist()} PiB={p.prior_mass_B!r} "
                f"moment={p.moment_sup!r} exponent={p.exponent!r}"
            )
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines)


# ----------------------------------------------------------------- covers


def _dist_to(prior, P0, metric):
    return pairwise_divergence(metric, P0.values[None, :], prior.densities,
                               prior.grid.cell_mass)[0]


def greedy_ball_cover(densities, target, metric, radius, cell_mass):
    """Cover the ``target`` atoms with open balls centred at target atoms.

    Centres are chosen farthest-point first, starting at the lowest target
    index.  Each piece is the set of target atoms within ``radius`` of its
    centre, so its convex hull stays inside the ball.
    """
    idx = np.flatnonzero(target)
    metric = DivergenceKind.parse(metric)
    if idx.size == 0:
        return Cover((), f"metric_balls({radius!r})")
    D = pairwise_divergence(metric, densities[idx], densities[idx], cell_mass)
    near = np.full(idx.size, np.inf)
    pieces = []
    while True:
        j = 0 if not pieces else int(np.argmax(near))
        if pieces and near[j] < radius:
            break
        members = np.flatnonzero(D[j] < radius)
        pieces.append(idx[members])
        near = np.minimum(near, D[j])
    return Cover(tuple(pieces), f"metric_balls({radius!r})")


def moment_table(P0, Vm, Qm):
    """``P0(p/q)`` for every ``(Q, P)`` pair, ``inf`` on support gaps.

    The integral runs over ``{p0 > 0, p > 0}``; a cell there with ``q = 0``
    makes the moment infinite.

    Returns
    -------
    ndarray, shape (len(Qm), len(Vm))
    """
    p0, mu = P0.values, P0.grid.cell_mass
    pos = p0 > 0
    Qp = Qm[:, pos]
    with np.errstate(divide="ignore"):
        W = np.where(Qp > 0, (p0[pos] * mu[pos]) / np.where(Qp > 0, Qp, 1.0), 0.0)
    vals = W @ Vm[:, pos].T
    gap = ((Qp <= 0).astype(float) @ (Vm[:, pos] > 0).T.astype(float)) > 0
    return np.where(gap, np.inf, vals)


# ------------------------------------------------------------------- main


def _charged(prior, idx):
    idx = np.asarray(idx, dtype=np.int64)
    return idx[prior.masses[idx] > 0]


def certify_main(P0, prior, cover, candidates_B, opts=None, theorem="main"):
    """Check the finite-cover testing conditions piece by piece.

    Parameters
    ----------
    P0 : GridDensity
    prior : DiscretePrior
        Its atoms form the model family.
    cover : Cover
    candidates_B : sequence of index arrays
        One ``B`` per piece, or a single ``B`` shared by all pieces.
    opts : SolverOptions, optional

    Returns
    -------
    Certificate
        Pass iff every piece has ``pi < 1 - 1e-6``, ``Pi(B) > 0`` and a
        finite moment, and the prior predictive dominates ``P0^n``.

    Raises
    ------
    ConfigurationError
        On an empty cover piece or a mismatched number of ``B`` sets.
    """
    opts = SolverOptions.coerce(opts)
    cands = [np.asarray(b, dtype=np.int64) for b in candidates_B]
    if len(cover) and len(cands) == 1:
        cands = cands * len(cover)
    if len(cover) and len(cands) != len(cover):
        raise ConfigurationError("need one B per piece or a single shared B")
    D = prior.densities
    records, failure = [], None
    for i, (piece, B) in enumerate(zip(cover.pieces, cands)):
        if piece.size == 0:
            raise ConfigurationError(f"cover piece {i} is empty")
        Bc = _charged(prior, B)
        pib = float(prior.masses[Bc].sum()) if Bc.size else 0.0
        notes = []
        if Bc.size < np.unique(B).size:
            notes.append(f"{np.unique(B).size - Bc.size} uncharged atoms dropped from B")
        Beff = Bc if Bc.size else B
        if Beff.size == 0:
            rec = PieceRecord(i, cover.names[i], piece, Beff, 0.0, np.nan, np.nan, np.nan,
                              0.0, False, notes=notes + ["B is empty"])
            records.append(rec)
            failure = failure or ("prior_mass_B", i)
            continue
        mom = float(np.max(moment_table(P0, D[piece], D[Beff])))
        tp = testing_power(P0, D[piece], D[Beff], opts)
        rec = PieceRecord(
            index=i, name=cover.names[i], atoms=piece, B=Beff, prior_mass_B=pib,
            moment_sup=mom, pi_value=tp.pi_value, alpha_star=tp.alpha_star,
            exponent=tp.exponent, converged=tp.converged,
            mixture_star=tp.mixture_star, witness_Q=int(Beff[tp.witness_Q]), notes=notes,
        )
        records.append(rec)
        if failure is None:
            if not pib > 0:
                failure = ("prior_mass_B", i)
            elif not np.isfinite(mom):
                failure = ("moment_sup", i)
            elif not tp.pi_value < 1.0 - PI_MARGIN:
                failure = ("testing_power", i)
    dom = domination_check(P0, prior)
    if failure is None and not dom.holds_for_all_n:
        failure = ("domination", None)
    exps = [r.exponent for r in records]
    exponent = float(min(exps)) if exps else np.inf
    cert = Certificate(theorem, records, exponent, failure is None,
                       failure[0] if failure else None, failure[1] if failure else None,
                       cover, cands, dom)
    if not records:
        cert.notes.append("vacuous: the target set contains no atoms")
    return cert


# -------------------------------------------------------------- schwartz


def certify_schwartz(P0, prior, epsilon, deltas=None, opts=None):
    """Hellinger consistency from a Kullback-Leibler prior.

    The set ``{H(P, P0) > 2 epsilon}`` is covered by greedy
    ``epsilon``-balls; the shared ``B`` is the set of charged atoms with
    ``KL(P0||Q) < min_i inf_{co V_i} KL``.
    """
    if deltas is None:
        deltas = 10.0 ** -np.arange(0, 9)
    kl_rep = kl_prior_check(P0, prior, deltas)
    H = _dist_to(prior, P0, "hellinger")
    target = H > 2.0 * epsilon
    cover = greedy_ball_cover(prior.densities, target, "hellinger", epsilon,
                              prior.grid.cell_mass)
    cover = Cover(cover.pieces, cover.kind, f"H(P, P0) > {2 * epsilon!r}")
    if not kl_rep.passed:
        cert = Certificate("schwartz", [], np.nan, False, "kl_prior", None, cover, [],
                           domination_check(P0, prior))
        cert.details["kl_prior"] = kl_rep
        return cert
    kl = _dist_to(prior, P0, "kl")
    infs = [kl_inf_over_hull(P0, prior.densities[p], opts)[0] for p in cover.pieces]
    kappa = float(min(infs)) if infs else np.inf
    B = np.flatnonzero(prior.charged & (kl < kappa))
    cert = certify_main(P0, prior, cover, [B], opts, theorem="schwartz")
    cert.details.update(kl_prior=kl_rep, kappa=kappa, piece_inf_kl=infs)
    return cert


def certify_kl_consistency(P0, prior, epsilon, cover=None, piece_radius=None, opts=None):
    """Consistency for Kullback-Leibler neighbourhoods ``{KL(P0||P) < epsilon}``.

    Parameters
    ----------
    cover : Cover, optional
        Pieces of ``{KL(P0||P) >= epsilon}``; greedy Hellinger balls of radius
        ``piece_radius`` (default ``sqrt(epsilon)/2``) when omitted.

    Notes
    -----
    A piece whose hull reaches divergence zero makes the certificate fail
    with the minimizing mixture weights recorded as the witness.
    """
    kl = _dist_to(prior, P0, "kl")
    target = kl >= epsilon
    if cover is None:
        r = np.sqrt(epsilon) / 2.0 if piece_radius is None else piece_radius
        cover = greedy_ball_cover(prior.densities, target, "hellinger", r, prior.grid.cell_mass)
    cover = Cover(cover.pieces, cover.kind, f"KL(P0||P) >= {epsilon!r}", cover.names)
    infs, witnesses = [], []
    for i, p in enumerate(cover.pieces):
        v, lo, w, _ = kl_inf_over_hull(P0, prior.densities[p], opts)
        infs.append(lo)
        witnesses.append(w)
        if not lo > 1e-9:
            cert = Certificate("kl_consistency", [], 0.0, False, "coKLD", i, cover, [],
                               domination_check(P0, prior))
            cert.details.update(witness_weights=w, witness_atoms=p, inf_kl=v)
            return cert
    b = float(min(infs)) if infs else np.inf
    B = np.flatnonzero(prior.charged & (kl < b))
    cert = certify_main(P0, prior, cover, [B], opts, theorem="kl_consistency")
    # moment hypothesis sup_{Q in B} P0(dP/dQ) < inf for every model member
    if B.size:
        allmom = moment_table(P0, prior.densities, prior.densities[B])
        cert.details["moment_hypothesis_sup"] = float(np.max(allmom))
        if cert.verdict and not np.isfinite(np.max(allmom)):
            cert.verdict, cert.failing_condition = False, "moment_hypothesis"
    cert.details.update(piece_inf_kl=infs, kl_radius=b)
    return cert


# ----------------------------------------------------------- metric ball


def _ratio_norms(P0, Pm, Qm, power):
    """``(sum_{p0>0} q (p/q)^power mu)`` for every ``(Q, P)``, inf on gaps."""
    p0, mu = P0.values, P0.grid.cell_mass
    pos = p0 > 0
    Qp, Pp, mp = Qm[:, pos], Pm[:, pos], mu[pos]
    out = np.empty((Qm.shape[0], Pm.shape[0]))
    lq, lp = safe_log(Qp), safe_log(Pp)
    for j in range(Qm.shape[0]):
        qpos = Qp[j] > 0
        gap = np.any(Pp[:, ~qpos] > 0, axis=1)
        with np.errstate(invalid="ignore"):
            t = np.exp(power * lp[:, qpos] + (1.0 - power) * lq[j, qpos])
        out[j] = np.where(gap, np.inf, np.nan_to_num(t) @ mp[qpos])
    return out


def _weighted_moment(P0, Pm, Qm, power):
    """``P0 (p/q)^power`` over ``{p0 > 0}``, inf where ``p > 0 = q``."""
    p0, mu = P0.values, P0.grid.cell_mass
    pos = p0 > 0
    Qp, Pp, w = Qm[:, pos], Pm[:, pos], (p0 * mu)[pos]
    lq, lp = safe_log(Qp), safe_log(Pp)
    out = np.empty((Qm.shape[0], Pm.shape[0]))
    for j in range(Qm.shape[0]):
        qpos = Qp[j] > 0
        gap = np.any(Pp[:, ~qpos] > 0, axis=1)
        with np.errstate(invalid="ignore"):
            t = np.exp(power * (lp[:, qpos] - lq[j, qpos]))
        out[j] = np.where(gap, np.inf, np.nan_to_num(t) @ w[qpos])
    return out


def envelope_scan(P0, prior, Bprime, r=2.0):
    """Envelope constants over the model and a candidate ball ``B'``.

    Returns
    -------
    dict
        ``L`` (theorem form), ``L_proof`` (proof form), the witness pair
        ``(P, Q)`` attaining the maximum (``-1`` denotes ``P0``) and a
        boolean ``finite``.
    """
    Pm = np.vstack([prior.densities, P0.values[None, :]])
    Qm = prior.densities[Bprime]
    r = float(r)
    if r == 2.0:
        tab = _ratio_norms(P0, Pm, Qm, 2.0)
        with np.errstate(invalid="ignore"):
            Lt = np.sqrt(tab)
        Lp = Lt
    elif r == 1.0:
        # s = inf: sup-norm of p/q on {p0 > 0}
        pos = P0.values > 0
        Qp, Pp = Qm[:, pos], Pm[:, pos]
        Lt = np.empty((Qm.shape[0], Pm.shape[0]))
        for j in range(Qm.shape[0]):
            qpos = Qp[j] > 0
            gap = np.any(Pp[:, ~qpos] > 0, axis=1)
            Lt[j] = np.where(gap, np.inf, np.max(Pp[:, qpos] / Qp[j, qpos], axis=1,
                                                 initial=0.0))
        Lp = Lt
    else:
        s = r / (r - 1.0)
        Lt = _weighted_moment(P0, Pm, Qm, max(s / r, 1.0)) ** (1.0 / s)
        Lp = _weighted_moment(P0, Pm, Qm, min(s / r, 1.0)) ** (1.0 / s)
    j, i = np.unravel_index(int(np.argmax(Lt)), Lt.shape)
    m = prior.size
    return {
        "L": float(Lt[j, i]),
        "L_proof": float(np.max(Lp)),
        "witness": (int(i) if i < m else -1, int(Bprime[j])),
        "finite": bool(np.isfinite(Lt[j, i])),
    }


def certify_metric_ball(P0, prior, epsilon, r=2.0, L=None, eps_prime=None, opts=None):
    """Consistency in Hellinger (``r = 2``) or Matusita ``d_r`` balls.

    Parameters
    ----------
    epsilon : float
        Target ``{d_r(P, P0) > 2 epsilon}`` is covered by ``epsilon``-balls.
    r : float
        Matusita order, at least one.
    L : float, optional
        Envelope constant; scanned from the model when omitted.
    eps_prime : float or "auto", optional
        Radius of the candidate ball ``B'`` (default ``epsilon``).  With
        ``"auto"`` the radius shrinks until every atom of ``B'`` dominates
        ``P0``.
    """
    r = float(r)
    if r < 1.0:
        raise OutOfDomainError("r must be at least one")
    metric = DivergenceKind("matusita", r) if r != 2.0 else DivergenceKind("hellinger")
    d0 = _dist_to(prior, P0, metric)
    if eps_prime is None:
        eps_prime = float(epsilon)
    elif eps_prime == "auto":
        bad = np.any((prior.densities <= 0) & (P0.values > 0)[None, :], axis=1)
        eps_prime = float(min(epsilon, np.min(d0[bad], initial=np.inf)))
    Bprime = np.flatnonzero(d0 < eps_prime)
    target = d0 > 2.0 * epsilon
    cover = greedy_ball_cover(prior.densities, target, metric, epsilon, prior.grid.cell_mass)
    cover = Cover(cover.pieces, cover.kind, f"d_{r:g}(P, P0) > {2 * epsilon!r}")
    theorem = "hellinger_ball" if r == 2.0 else "matusita_ball"
    details = {"eps_prime": eps_prime, "Bprime": Bprime}
    if Bprime.size == 0:
        cert = Certificate(theorem, [], np.nan, False, "prior_ball", None, cover, [])
        cert.details.update(details)
        return cert
    env = envelope_scan(P0, prior, Bprime, r)
    details["envelope"] = env
    if not env["finite"] or (L is not None and not env["L"] <= L):
        cert = Certificate(theorem, [], np.nan, False, "envelope", None, cover, [])
        cert.notes.append(f"envelope witness (P, Q) = {env['witness']}")
        cert.details.update(details)
        return cert
    Lc = env["L"] if L is None else float(L)
    if r == 2.0:
        radius = min(epsilon ** 2 / (4.0 * Lc ** 2), eps_prime)
        bound = 1.0 - epsilon ** 2 / 4.0
    else:
        s = np.inf if r == 1.0 else r / (r - 1.0)
        expo = 1.0 if r == 1.0 else min(s / r, 1.0)
        radius = min(Lc ** (-expo) * epsilon ** (2 * r) / 16.0, eps_prime)
        bound = 1.0 - epsilon ** (2 * r) / 16.0
    B = np.flatnonzero(prior.charged & (d0 < radius))
    details.update(L=Lc, B_radius=radius, proof_bound=bound)
    if B.size == 0:
        cert = Certificate(theorem, [], np.nan, False, "prior_ball", None, cover, [B])
        cert.details.update(details)
        return cert
    cert = certify_main(P0, prior, cover, [B], opts, theorem=theorem)
    opts = SolverOptions.coerce(opts)
    checks = []
    for rec in cert.pieces:
        sup = float(np.max(_inner_sup(1.0 / r, P0.values, prior.densities[rec.atoms],
                                      prior.densities[B], P0.grid.cell_mass, opts).upper))
        checks.append((rec.index, sup, rec.pi_value))
    details["proof_check"] = checks
    details["proof_bound_ok"] = all(s <= bound + 1e-9 for _, s, _ in checks)
    cert.details.update(details)
    return cert


# ----------------------------------------------------------------- barron


def certify_barron(P0, prior, sieve, K, L, B, target, schedule, cover_radius,
                   metric="hellinger", opts=None):
    """Sieve conditions checked along a schedule of sample sizes.

    Parameters
    ----------
    sieve : callable
        ``n -> bool mask`` (or index array) of the sieve at size ``n``.
    K, L : float
        Positive constants of the mass and testing conditions.
    B : index array
    target : bool mask over atoms
    schedule : sequence of int
    cover_radius : float
        Radius of the greedy cover built inside each sieve.

    Returns
    -------
    Certificate
        ``details["schedule"]`` holds one record per ``n``; the verdict is
        pass iff every condition holds from some schedule point onwards
        (``details["holds_from"]``).
    """
    schedule = [int(n) for n in schedule]
    if not schedule:
        raise ConfigurationError("the schedule is empty")
    if not (K > 0 and L > 0):
        raise ConfigurationError("K and L must be positive")
    opts = SolverOptions.coerce(opts)
    B = np.asarray(B, dtype=np.int64)
    D = prior.densities
    target = np.asarray(target, dtype=bool)
    prev = None
    rows, last = [], None
    for n in schedule:
        S = prior.mask(sieve(n))
        if prev is not None and np.any(prev & ~S):
            raise ConfigurationError("the sieve must be increasing")
        prev = S
        cover = greedy_ball_cover(D, target & S, metric, cover_radius, prior.grid.cell_mass)
        pis = []
        for piece in cover.pieces:
            tp = testing_power(P0, D[piece], D[B], opts)
            pis.append(tp.pi_value)
        out = np.flatnonzero(target & ~S)
        tail_mom = float(np.max(moment_table(P0, D[out], D[B]))) if out.size else 0.0
        in_mom = [float(np.max(moment_table(P0, D[p], D[B]))) for p in cover.pieces]
        row = {
            "n": n,
            "N_n": len(cover),
            "count_ok": len(cover) <= np.exp(L * n / 2.0),
            "pi_max": max(pis) if pis else 0.0,
            "pi_ok": all(p <= np.exp(-L) for p in pis),
            "outside_mass": float(prior.masses[~S].sum()),
            "mass_ok": float(prior.masses[~S].sum()) <= np.exp(-n * K),
            "tail_moment": tail_mom,
            "tail_ok": tail_mom <= np.exp(K / 2.0),
            "moment_ok": all(np.isfinite(m) for m in in_mom),
        }
        row["ok"] = all(row[k] for k in ("count_ok", "pi_ok", "mass_ok", "tail_ok", "moment_ok"))
        rows.append(row)
        last = cover
    pib = float(prior.masses[B].sum())
    holds_from = None
    for row in reversed(rows):
        if not row["ok"]:
            break
        holds_from = row["n"]
    verdict = holds_from is not None and pib > 0
    failing = None
    if not pib > 0:
        failing = "prior_mass_B"
    elif holds_from is None:
        bad = rows[-1]
        failing = next(k for k in ("count_ok", "pi_ok", "mass_ok", "tail_ok", "moment_ok")
                       if not bad[k])[:-3]
    cert = Certificate("barron", [], np.log(1.0 / max(r["pi_max"] for r in rows))
                       if any(r["pi_max"] > 0 for r in rows) else np.inf,
                       verdict, failing, None, last, [B], domination_check(P0, prior))
    cert.details.update(schedule=rows, holds_from=holds_from, prior_mass_B=pib)
    return cert


def sigma_schedule(f, epsilon, sigma_of_n, ns):
    """Values ``n f(epsilon / sigma_n)`` along ``ns`` for a growing sieve."""
    ns = np.asarray(ns, dtype=float)
    vals = np.array([n * f(epsilon / sigma_of_n(n)) for n in ns])
    return {"n": ns, "value": vals, "increasing": bool(np.all(np.diff(vals) > 0))}


# ----------------------------------------------------------------- walker


@dataclass(frozen=True)
class SummabilityReport:
    beta: float
    partial_sum: float
    tail_bound: float
    total: float
    summable: bool
    lower_estimate_only: bool


def _tail_total(tail, beta, I):
    """Closed-form total and tail of ``sum_i Pi(V_i)^beta`` for a declared family."""
    fam = tail["family"]
    if fam == "geometric":
        a, q = float(tail["first"]), float(tail["ratio"])
        if not 0 < q < 1:
            raise ConfigurationError("geometric ratio must lie in (0, 1)")
        total = a ** beta / (1.0 - q ** beta)
        tail_b = a ** beta * q ** (beta * I) / (1.0 - q ** beta)
        return total, tail_b
    if fam == "inverse_quadratic":
        # Pi(V_i) = 1/(i(i+1)) ~ i^-2
        if beta <= 0.5:
            return np.inf, np.inf
        tail_b = I ** (1.0 - 2.0 * beta) / (2.0 * beta - 1.0)
        return None, tail_b
    if fam == "power":
        c, p = float(tail["scale"]), float(tail["exponent"])
        if p * beta <= 1.0:
            return np.inf, np.inf
        return None, c ** beta * I ** (1.0 - p * beta) / (p * beta - 1.0)
    raise ConfigurationError(f"unknown tail family {fam!r}")


def walker_summability(masses, beta=0.5, tail=None):
    """``sum_i Pi(V_i)^beta`` with an analytic tail when declared.

    Parameters
    ----------
    masses : sequence of float
        Masses of the first ``I`` pieces.
    beta : float
    tail : dict, optional
        ``{"family": "geometric", "first": a, "ratio": q}`` for
        ``Pi(V_i) = a q^(i-1)``, ``{"family": "inverse_quadratic"}`` for
        ``1/(i(i+1))`` or ``{"family": "power", "scale": c, "exponent": p}``
        for ``c i^-p``.  Without it the sum is a lower estimate.
    """
    m = np.asarray(masses, dtype=float)
    I = m.size
    partial = float(np.sum(m ** beta))
    if tail is None:
        return SummabilityReport(beta, partial, np.nan, partial, True, True)
    total, tail_b = _tail_total(tail, beta, I)
    if total is None:
        total = partial + tail_b
    return SummabilityReport(beta, partial, float(tail_b), float(total),
                             bool(np.isfinite(total)), False)


@dataclass(frozen=True)
class WalkerReport:
    value: float
    terms: tuple
    alphas: tuple
    summability: tuple


def walker_bound(P0, pieces, B_pieces, piece_masses, B_masses, n, alpha="optimize",
                 tail=None, betas=(0.5,), opts=None):
    """Countable-cover bound ``sum_i inf_a (Pi(V_i)/Pi(B_i))^a pi_i(a)^n``.

    Parameters
    ----------
    pieces : sequence of (m_i, k) arrays or GridDensity lists
        The first ``I`` pieces.
    B_pieces : sequence of (b_i, k) arrays
        One ``B`` per piece (a single one is broadcast).
    piece_masses, B_masses : sequence of float
        ``Pi(V_i)`` and ``Pi(B_i)``.
    alpha : float, sequence of float or "optimize"
    tail : dict, optional
        Declared family of the piece masses (see :func:`walker_summability`).
    """
    opts = SolverOptions.coerce(opts)
    I = len(pieces)
    if I < 1:
        raise ConfigurationError("at least one piece is required")
    if len(B_pieces) == 1:
        B_pieces = list(B_pieces) * I
    B_masses = np.broadcast_to(np.asarray(B_masses, dtype=float), (I,))
    piece_masses = np.asarray(piece_masses, dtype=float)
    if np.any(B_masses <= 0):
        raise ConfigurationError("every B_i needs positive prior mass")
    alphas = ([alpha] * I) if (alpha == "optimize" or np.isscalar(alpha)) else list(alpha)
    terms, used = [], []
    for i in range(I):
        Vm = _as_matrix(pieces[i])
        Qm = _as_matrix(B_pieces[i])
        lr = np.log(piece_masses[i]) - np.log(B_masses[i]) if piece_masses[i] > 0 else -np.inf

        def logterm(a, Vm=Vm, Qm=Qm, lr=lr):
            s = float(np.max(_inner_sup(a, P0.values, Vm, Qm, P0.grid.cell_mass, opts).upper))
            with np.errstate(divide="ignore"):
                ls = np.log(s)
            base = 0.0 if a == 0 else a * lr
            return base + (0.0 if n == 0 else n * ls)

        if alphas[i] == "optimize":
            cands = [(logterm(0.0), 0.0), (logterm(1.0), 1.0)]
            x, fx, _ = golden_section(logterm, 0.0, 1.0, tol=opts.alpha_tol)
            cands.append((fx, x))
            lt, a = min(cands, key=lambda t: (t[0], t[1]))
        else:
            a = float(alphas[i])
            lt = logterm(a)
        terms.append(float(np.exp(lt)))
        used.append(a)
    tot = float(np.sum(terms))
    summ = tuple(walker_summability(piece_masses, b, tail) for b in betas)
    return WalkerReport(tot, tuple(terms), tuple(used), summ)


# --------------------------------------------------------------- marginal


def _theta_target(theta, theta0, epsilon, metric):
    th = np.asarray(theta, dtype=float)
    if th.ndim == 1:
        th = th[:, None]
    t0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    diff = th - t0[None, :]
    if metric == "max":
        dist, step = np.max(np.abs(diff), axis=1), epsilon
    elif metric == "euclidean":
        dist, step = np.sqrt(np.sum(diff ** 2, axis=1)), epsilon / np.sqrt(th.shape[1])
    else:
        raise ConfigurationError(f"unknown metric {metric!r}")
    return dist > epsilon + THETA_TOL, diff, step


def theta_target(theta, theta0, epsilon, metric="max"):
    """Atoms with ``g(theta, theta0) > epsilon``.

    Mesh points at distance exactly ``epsilon`` are excluded up to a
    rounding tolerance of ``1e-9``.
    """
    return _theta_target(theta, theta0, epsilon, metric)[0]


def certify_marginal(P0, prior, theta, theta0, epsilon, B_pieces=None, B=None,
                     f_value=None, metric="max", opts=None):
    """Marginal consistency for a finite-dimensional parameter ``theta``.

    Parameters
    ----------
    theta : ndarray, shape (m,) or (m, d)
        Parameter of interest for every atom.
    theta0 : float or sequence
    epsilon : float
    B_pieces : dict, optional
        Piece name (``"+1"``, ``"-1"``, ... or ``"+"``, ``"-"`` in one
        dimension) to ``B`` atom indices.
    B : index array, optional
        Shared ``B`` when ``B_pieces`` is omitted.
    f_value : float, optional
        Lower-bound function value ``f(epsilon / sigma)`` for the endpoint
        cross-check ``min{P0(p > 0), P(p0 > 0)} <= 1 - f``.
    metric : {"max", "euclidean"}
        Metric on ``theta`` defining the target set.

    Notes
    -----
    The directional pieces ``{+-(theta_j - theta0_j) > epsilon}`` cover the
    target for the max metric, and for the Euclidean metric after shrinking
    ``epsilon`` by ``sqrt(d)``.
    """
    target, diff, step = _theta_target(theta, theta0, epsilon, metric)
    d = diff.shape[1]
    pieces, names, notes = [], [], []
    for j in range(d):
        for sign in ("+", "-"):
            name = sign if d == 1 else f"{sign}{j + 1}"
            sel = (diff[:, j] > step + THETA_TOL) if sign == "+" else (diff[:, j] < -step - THETA_TOL)
            sel &= target
            if not sel.any():
                notes.append(f"piece {name} has no atoms and is skipped")
                continue
            pieces.append(np.flatnonzero(sel))
            names.append(name)
    cover = Cover(tuple(pieces), "explicit", f"g(theta, theta0) > {epsilon!r}", tuple(names))
    if B_pieces is not None:
        cands = [np.asarray(B_pieces[nm], dtype=np.int64) for nm in names]
    elif B is not None:
        cands = [np.asarray(B, dtype=np.int64)]
    else:
        raise ConfigurationError("either B_pieces or B is required")
    cert = certify_main(P0, prior, cover, cands, opts, theorem="marginal")
    cert.notes.extend(notes)
    # endpoint quantities: P0-mass of the union support and max P-mass of supp p0
    p0 = P0.values
    mu = P0.grid.cell_mass
    checks = []
    for rec in cert.pieces:
        Vm = prior.densities[rec.atoms]
        a0 = float(np.sum((p0 * mu)[np.any(Vm > 0, axis=0)]))
        a1 = float(np.max((Vm * mu) @ (p0 > 0)))
        row = {"piece": rec.name, "P0_mass_union": a0, "max_P_mass_supp_p0": a1,
               "endpoint_bound": min(a0, a1), "pi": rec.pi_value}
        if f_value is not None:
            row["endpoint_ok"] = min(a0, a1) <= 1.0 - f_value + 1e-9
            row["pi_ok"] = rec.pi_value <= min(a0, a1) + 0.5 * f_value + 1e-9
        checks.append(row)
    cert.details["endpoint_checks"] = checks
    if not target.any():
        cert.notes.append("vacuous: epsilon exceeds the feasible theta range")
    return cert


# -------------------------------------------------------------- toussaint


def toussaint_check(P, Q, r, tol=1e-12):
    """Evaluate ``rho_{1/r}(P, Q) <= sqrt(2/(r(r-1))) sqrt(1 - d_r^{2r}/4)``.

    Returns
    -------
    holds : bool
        ``slack >= -tol``.
    slack : float
        Right-hand side minus left-hand side.
    """
    r = float(r)
    if not r > 1:
        raise OutOfDomainError("the inequality requires r > 1")
    lhs = hellinger_transform(P, Q, 1.0 / r)
    d = pairwise_divergence(DivergenceKind("matusita", r), P.values[None, :],
                            Q.values[None, :], P.grid.cell_mass)[0, 0]
    rhs = np.sqrt(2.0 / (r * (r - 1.0))) * np.sqrt(max(0.0, 1.0 - d ** (2 * r) / 4.0))
    slack = float(rhs - lhs)
    return slack >= -tol, slack
