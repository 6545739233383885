"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line."""

import itertools
import time
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from postcons.bayes import DiscretePrior, domination_check, kl_prior_check
from postcons.certify import toussaint_check, walker_bound, walker_summability
from postcons.measures import DominatingGrid, GridDensity, pairwise_divergence
from postcons.rng import make_generator
from postcons.simlab import check_instance, decay_fit, load_config, random_instance, run_experiment
from postcons.simlab.cli import main
from postcons.transforms import (
    ht_bound_iid,
    kl_separation,
    power_moment,
    power_moment_derivative,
    testing_power as power_of_test,
)

from .conftest import record

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
STRICT = 1e-6


def random_density(rng, k, floor=1e-3):
    p = rng.dirichlet(np.ones(k))
    p = floor + (1.0 - k * floor) * p
    return GridDensity(DominatingGrid.uniform(k), p)


def at_n(result, n):
    j = list(result.config.n_schedule).index(n)
    return result.masses[:, j]


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def test_criterion_01_hellinger_transform_laws():
    rng = make_generator(101)
    alphas = np.linspace(0.0, 1.0, 11)
    worst_cvx, worst_end, worst_rel, worst_fine = -np.inf, 0.0, 0.0, 0.0
    h = 1e-5
    with Timer() as t:
        for _ in range(100):
            k = int(rng.integers(2, 17))
            P0, P, Q = (random_density(rng, k) for _ in range(3))
            f = np.array([power_moment(P0, P, Q, a).value for a in alphas])
            for i, j in itertools.combinations(range(alphas.size), 2):
                mid = power_moment(P0, P, Q, (alphas[i] + alphas[j]) / 2).value
                worst_cvx = max(worst_cvx, mid - (f[i] + f[j]) / 2)
            res = power_moment(P0, P, Q, 0.5)
            worst_end = max(worst_end,
                            abs(power_moment(P0, P, Q, 1e-5).value - res.limit_at_zero),
                            abs(power_moment(P0, P, Q, 1 - 1e-5).value - res.limit_at_one))
            worst_fine = max(worst_fine,
                             abs(power_moment(P0, P, Q, 1e-7).value - res.limit_at_zero),
                             abs(power_moment(P0, P, Q, 1 - 1e-7).value - res.limit_at_one))
            for a in (0.1, 0.3, 0.5, 0.7, 0.9):
                d = power_moment_derivative(P0, P, Q, a)
                fd = (power_moment(P0, P, Q, a + h).value
                      - power_moment(P0, P, Q, a - h).value) / (2 * h)
                worst_rel = max(worst_rel, abs(d - fd) / abs(fd))
    ok = worst_cvx <= 1e-9 and worst_end < 1e-3 and worst_rel < 1e-5
    assert record(1, "Hellinger-transform laws", ok,
                  f"convexity excess {worst_cvx:.2e}, endpoint gap {worst_end:.2e} "
                  f"(at distance 1e-7: {worst_fine:.2e}), "
                  f"derivative rel err {worst_rel:.2e} ({t.seconds:.1f}s)")


def test_criterion_02_kl_equivalence():
    rng = make_generator(202)
    counter, excluded, separated = 0, 0, 0
    with Timer() as t:
        for _ in range(200):
            k = int(rng.integers(2, 17))
            P0 = random_density(rng, k)
            V = [random_density(rng, k).values for _ in range(int(rng.integers(1, 4)))]
            B = [random_density(rng, k).values for _ in range(int(rng.integers(1, 4)))]
            pi = power_of_test(P0, V, B).pi_value
            margin = kl_separation(P0, V, B).margin
            if abs(margin) <= STRICT:
                excluded += 1
                continue
            separated += margin > STRICT
            counter += (pi < 1 - STRICT) != (margin > STRICT)
    assert record(2, "KL equivalence", counter == 0,
                  f"{counter} counterexamples, {separated} separated, {excluded} excluded "
                  f"({t.seconds:.1f}s)")


def test_criterion_03_oracle_dominance():
    rng = make_generator(2024)
    worst = np.inf
    with Timer() as t:
        for _ in range(50):
            worst = min(worst, check_instance(random_instance(rng)).min_slack)
    assert record(3, "oracle dominance", worst >= -1e-9,
                  f"worst slack {worst:.3e} over 50 instances ({t.seconds:.1f}s)")


def test_criterion_04_schwartz_pipeline():
    with Timer() as t:
        res = run_experiment(load_config(CONFIGS / "bernoulli_schwartz.toml"))
    cert = res.certificate
    D = cert.exponent
    med = float(np.median(at_n(res, 500)))
    fit = decay_fit(res.masses, res.config.n_schedule)
    ok = (cert.passed and res.config.replications == 50 and med < 0.01
          and med < np.exp(-500 * D / 2) and fit.slope <= -D / 2 + 0.02)
    assert record(4, "Schwartz pipeline", ok,
                  f"certificate {'pass' if cert.passed else 'fail'}, D={D:.3e}, "
                  f"median mass at n=500 {med:.2e} (exp(-nD/2)={np.exp(-500 * D / 2):.4f}), "
                  f"slope {fit.slope:.4f} <= {-D / 2 + 0.02:.4f} ({t.seconds:.1f}s)")


def test_criterion_05_fixed_width_contrast():
    with Timer() as t:
        res = run_experiment(load_config(CONFIGS / "fixed_width.toml"))
    sc, cert = res.scenario, res.certificate
    m = sc.model
    kl_rep = kl_prior_check(sc.P0, sc.prior, 10.0 ** -np.arange(0, 9))
    kl = pairwise_divergence("kl", sc.P0.values[None], sc.prior.densities,
                             sc.prior.grid.cell_mass)[0]
    off = np.abs(sc.theta - sc.theta0[0]) > 1e-9
    f = float(m.f_profile(m.epsilon))
    pi_max = max(p.pi_value for p in cert.pieces)
    frac = float(np.mean(at_n(res, 300) < 0.05))
    ok = (not kl_rep.passed and bool(np.all(np.isinf(kl[off]))) and cert.passed
          and pi_max <= 1 - f + 1e-9 and frac >= 0.9)
    assert record(5, "fixed-width contrast", ok,
                  f"KL prior {'pass' if kl_rep.passed else 'fail'} "
                  f"(off-theta0 KL all inf: {bool(np.all(np.isinf(kl[off])))}), "
                  f"certificate {'pass' if cert.passed else 'fail'} with max pi {pi_max:.5f} "
                  f"<= 1 - f = {1 - f:.5f}, fraction below 0.05 at n=300 {frac:.2f} "
                  f"({t.seconds:.1f}s)")


def test_criterion_06_support_boundary():
    with Timer() as t:
        res = run_experiment(load_config(CONFIGS / "support_boundary.toml"))
    cert = res.certificate
    limit = 1 - np.exp(-2) * 0.1 + 1e-9
    ends = [row["endpoint_bound"] for row in cert.details["endpoint_checks"]]
    pi_max = max(p.pi_value for p in cert.pieces)
    frac = float(np.mean(at_n(res, 400) < 0.05))
    lower = cert.details["lower_mass"]
    ok = cert.passed and max(ends) <= limit and pi_max <= limit and frac >= 0.9 and lower.passed
    assert record(6, "support boundary", ok,
                  f"certificate {'pass' if cert.passed else 'fail'}, endpoint bound "
                  f"{max(ends):.5f} and max pi {pi_max:.5f} <= {limit:.5f}, fraction below 0.05 "
                  f"at n=400 {frac:.2f}, lower mass {'pass' if lower.passed else 'fail'} "
                  f"({t.seconds:.1f}s)")


@pytest.mark.parametrize("name", ["normal_location", "uniform_scale"])
def test_criterion_07_mixtures(name):
    with Timer() as t:
        res = run_experiment(load_config(CONFIGS / f"{name}.toml"))
    cert = res.certificate
    L = cert.details.get("L", np.inf)
    med = float(np.median(at_n(res, 400)))
    ok = (np.isfinite(L) and cert.passed and res.config.replications == 30
          and cert.details.get("proof_bound_ok", False) and med < 0.05)
    assert record(7, f"mixture consistency ({name})", ok,
                  f"L={L:.3f}, certificate {'pass' if cert.passed else 'fail'}, median "
                  f"mass at n=400 {med:.2e} ({t.seconds:.1f}s)")


def test_criterion_08_walker():
    i = np.arange(1, 41)
    geo = walker_summability(2.0 ** -i, 0.5, {"family": "geometric", "first": 0.5, "ratio": 0.5})
    harm = walker_summability(1.0 / (i * (i + 1)), 0.5, {"family": "inverse_quadratic"})
    rng = make_generator(808)
    worst = 0.0
    for _ in range(20):
        k = int(rng.integers(2, 8))
        P0 = random_density(rng, k)
        V = np.vstack([random_density(rng, k).values for _ in range(2)])
        Q = np.vstack([random_density(rng, k).values])
        piv, pib = rng.uniform(0.05, 0.5, 2)
        n = int(rng.integers(0, 30))
        for a in (0.0, 0.25, 0.5, 0.75, 1.0):
            w = walker_bound(P0, [V], [Q], [piv], [pib], n, alpha=a).value
            ref = ht_bound_iid(P0, V, (Q, np.ones(1)), pib, n, a) * piv ** a
            worst = max(worst, abs(w - ref) / ref)
    ok = (geo.summable and abs(geo.total - 1 / (np.sqrt(2) - 1)) <= 1e-12
          and not harm.summable and worst <= 1e-10)
    assert record(8, "Walker summability", ok,
                  f"geometric total {geo.total:.15f}, inverse-quadratic summable "
                  f"{harm.summable}, single-piece rel err {worst:.1e}")


def test_criterion_09_toussaint():
    rng = make_generator(909)
    worst = {}
    for r in (2, 3, 4):
        slacks = []
        for _ in range(1000):
            k = int(rng.integers(2, 17))
            P = GridDensity(DominatingGrid.uniform(k), rng.dirichlet(np.ones(k)))
            Q = GridDensity(DominatingGrid.uniform(k), rng.dirichlet(np.ones(k)))
            slacks.append(toussaint_check(P, Q, r)[1])
        worst[r] = (min(slacks), int(np.sum(np.array(slacks) < -1e-12)))
    ok = all(w >= -1e-12 for w, _ in worst.values())
    assert record(9, "Toussaint inequality", ok,
                  ", ".join(f"r={r}: worst slack {w:.3e}, {c}/1000 violations"
                            for r, (w, c) in worst.items()))


def test_criterion_10_domination():
    g = DominatingGrid.uniform(2)
    prior = DiscretePrior(g, [[1.0, 0.0], [0.0, 1.0]], [0.5, 0.5])
    rep = domination_check(GridDensity(g, [0.5, 0.5]), prior)
    D = prior.densities
    first = next(n for n in range(1, 7) for x in itertools.product(range(2), repeat=n)
                 if not np.any(np.prod(D[:, list(x)], axis=1) > 0))
    ok = rep.failing_n == 2 and first == 2 and not rep.holds_for_all_n
    assert record(10, "domination", ok,
                  f"reported failing n={rep.failing_n}, enumeration n={first}")


def test_criterion_11_determinism(tmp_path):
    cfg = str(CONFIGS / "bernoulli_schwartz.toml")
    runner = CliRunner()
    with Timer() as t:
        a = runner.invoke(main, ["simulate", cfg, "--out", str(tmp_path / "serial"),
                                 "--workers", "1"])
        b = runner.invoke(main, ["simulate", cfg, "--out", str(tmp_path / "parallel"),
                                 "--workers", "4"])
    same = (a.exit_code == 0 and b.exit_code == 0
            and (tmp_path / "serial" / "trajectories.csv").read_bytes()
            == (tmp_path / "parallel" / "trajectories.csv").read_bytes())
    assert record(11, "determinism", same,
                  f"serial and 4-worker CSV byte-identical: {same} ({t.seconds:.1f}s)")
