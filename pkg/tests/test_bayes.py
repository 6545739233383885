import itertools
from fractions import Fraction

import numpy as np
import pytest

from postcons.bayes import (
    DiscretePrior,
    PosteriorState,
    domination_check,
    greedy_net,
    kl_prior_check,
    log_posterior_mass,
    matching_diagnostic,
    net_prior,
    posterior_mass,
    posterior_update,
    prior_predictive_loglik,
    stick_breaking_prior,
)
from postcons.exceptions import IllDefinedPosteriorError, InvalidConditioningError
from postcons.measures import DominatingGrid, GridDensity, pairwise_divergence
from postcons.scenarios import build_bernoulli
from postcons.simlab.oracle import brute_force_posterior_expectation

from .conftest import density


def two_atom(d1, d2, w=(0.5, 0.5)):
    return DiscretePrior(DominatingGrid.uniform(len(d1)), [d1, d2], list(w))


class TestPrior:
    def test_validation(self):
        g = DominatingGrid.uniform(2)
        with pytest.raises(ValueError):
            DiscretePrior(g, [[0.5, 0.5]], [0.9])
        with pytest.raises(ValueError):
            DiscretePrior(g, [[0.5, 0.6]], [1.0])

    def test_conditioned(self):
        pr = DiscretePrior(DominatingGrid.uniform(2), [[1, 0], [0.5, 0.5], [0, 1]],
                           [0.5, 0.25, 0.25])
        c = pr.conditioned([1, 2])
        np.testing.assert_allclose(c.masses, [0.5, 0.5])
        with pytest.raises(InvalidConditioningError):
            pr.with_masses([1.0, 0.0, 0.0]).conditioned([1, 2])


class TestPosterior:
    def test_elimination(self):
        st = posterior_update(PosteriorState.initial(two_atom([1, 0], [0.5, 0.5])), [1])
        np.testing.assert_allclose(st.masses(), [0.0, 1.0])

    def test_identical_atoms(self):
        pr = two_atom([0.3, 0.7], [0.3, 0.7], (0.2, 0.8))
        st = posterior_update(PosteriorState.initial(pr), [0, 1, 1, 0, 1])
        np.testing.assert_allclose(st.masses(), [0.2, 0.8], atol=1e-15)

    def test_single_step_bayes(self):
        st = posterior_update(PosteriorState.initial(two_atom([0.9, 0.1], [0.5, 0.5])), [0])
        assert st.masses()[0] == pytest.approx(0.45 / 0.7, abs=1e-15)
        assert st.masses()[0] == pytest.approx(0.6429, abs=1e-4)

    def test_subset_masses(self, rng):
        pr = DiscretePrior(DominatingGrid.uniform(3), rng.dirichlet(np.ones(3), 4),
                           rng.dirichlet(np.ones(4)))
        st = posterior_update(PosteriorState.initial(pr), [0, 2, 2, 1])
        assert posterior_mass(st, None) == pytest.approx(1.0, abs=1e-12)
        assert posterior_mass(st, []) == 0.0
        assert log_posterior_mass(st, []) == -np.inf
        a, b = posterior_mass(st, [0, 2]), posterior_mass(st, [1, 3])
        assert a + b == pytest.approx(1.0, abs=1e-12)
        assert posterior_mass(st, lambda label: label % 2 == 0) == pytest.approx(a, abs=1e-15)

    def test_sequential_equals_batch(self, rng):
        pr = DiscretePrior(DominatingGrid.uniform(4), rng.dirichlet(np.ones(4), 5),
                           rng.dirichlet(np.ones(5)))
        x = rng.integers(0, 4, 40)
        batch = posterior_update(PosteriorState.initial(pr), x)
        seq = PosteriorState.initial(pr)
        for chunk in np.array_split(x, 7):
            seq = posterior_update(seq, chunk)
        np.testing.assert_array_equal(batch.log_weights, seq.log_weights)
        assert batch.n_observed == seq.n_observed == 40

    def test_merge_equivalence(self, rng):
        D = rng.dirichlet(np.ones(3), 3)
        w = rng.dirichlet(np.ones(3))
        g = DominatingGrid.uniform(3)
        pr = DiscretePrior(g, D, w)
        dup = DiscretePrior(g, np.vstack([D, D[:1]]), np.r_[w[0] * 0.3, w[1:], w[0] * 0.7])
        x = rng.integers(0, 3, 25)
        m1 = posterior_update(PosteriorState.initial(pr), x).masses()
        m2 = posterior_update(PosteriorState.initial(dup), x).masses()
        np.testing.assert_allclose(m1, np.r_[m2[0] + m2[3], m2[1:3]], atol=1e-12)

    def test_ill_defined(self):
        pr = two_atom([1, 0], [1, 0])
        with pytest.raises(IllDefinedPosteriorError) as e:
            posterior_update(PosteriorState.initial(pr), [0, 0, 1, 1])
        assert e.value.index == 2

    def test_matches_enumeration(self):
        atoms = [[Fraction(1, 3), Fraction(2, 3)], [Fraction(3, 4), Fraction(1, 4)]]
        w = [Fraction(2, 5), Fraction(3, 5)]
        pr = DiscretePrior(DominatingGrid.uniform(2), np.array(atoms, float), np.array(w, float))
        for x in itertools.product(range(2), repeat=4):
            num = w[0] * np.prod([atoms[0][i] for i in x])
            den = num + w[1] * np.prod([atoms[1][i] for i in x])
            st = posterior_update(PosteriorState.initial(pr), list(x))
            assert st.masses()[0] == pytest.approx(float(num / den), abs=1e-12)


class TestPredictive:
    def test_single_atom(self):
        pr = DiscretePrior(DominatingGrid.uniform(2), [[0.3, 0.7]], [1.0])
        assert prior_predictive_loglik(pr, [0, 1, 1]) == pytest.approx(np.log(0.3 * 0.49))

    def test_restrict_all(self):
        pr = two_atom([0.9, 0.1], [0.5, 0.5])
        assert prior_predictive_loglik(pr, [0], restrict_to=[0, 1]) == pytest.approx(
            prior_predictive_loglik(pr, [0]))
        assert prior_predictive_loglik(pr, [0]) == pytest.approx(np.log(0.7), abs=1e-15)

    def test_zero_restriction(self):
        pr = two_atom([0.9, 0.1], [0.5, 0.5], (1.0, 0.0))
        with pytest.raises(InvalidConditioningError):
            prior_predictive_loglik(pr, [0], restrict_to=[1])


class TestDomination:
    def test_fails_at_two(self):
        rep = domination_check(density([0.5, 0.5]), two_atom([1, 0], [0, 1]))
        assert not rep.holds_for_all_n and rep.failing_n == 2

    def test_full_support_atom(self):
        pr = DiscretePrior(DominatingGrid.uniform(3), [[1, 0, 0], [0.2, 0.3, 0.5]], [0.9, 0.1])
        assert domination_check(density([0.1, 0.1, 0.8]), pr).holds_for_all_n

    def test_agrees_with_enumeration(self, rng):
        g = DominatingGrid.uniform(3)
        for _ in range(30):
            D = rng.dirichlet(np.ones(3), 3)
            D[rng.random((3, 3)) < 0.4] = 0.0
            D[D.sum(axis=1) == 0, 0] = 1.0
            D /= D.sum(axis=1, keepdims=True)
            pr = DiscretePrior(g, D, np.full(3, 1 / 3))
            P0 = density([0.3, 0.3, 0.4])
            rep = domination_check(P0, pr)
            first = None
            for n in range(1, 7):
                for x in itertools.product(range(3), repeat=n):
                    if not np.any(np.prod(D[:, list(x)], axis=1) > 0):
                        first = n
                        break
                if first:
                    break
            assert rep.failing_n == first
            assert rep.holds_for_all_n == (first is None)


class TestKLPrior:
    def test_atom_at_p0(self):
        rep = kl_prior_check(density([0.5, 0.5]), two_atom([0.5, 0.5], [0.9, 0.1]),
                             [1.0, 0.1, 1e-6])
        assert rep.passed and rep.inf_kl == 0.0

    def test_no_neighbourhood(self):
        rep = kl_prior_check(density([0.5, 0.5]), two_atom([1, 0], [0.9, 0.1]), [1.0, 0.1])
        assert not rep.passed
        assert rep.inf_kl == pytest.approx(np.log(5 / 3))

    def test_deltas_validated(self):
        with pytest.raises(ValueError):
            kl_prior_check(density([0.5, 0.5]), two_atom([1, 0], [0, 1]), [0.1, 0.2])


class TestMatching:
    def test_single_atom_constant_zero(self):
        P0 = density([0.2, 0.8])
        pr = DiscretePrior(P0.grid, [P0.values], [1.0])
        rep = matching_diagnostic(P0, pr, 50, 5, 1)
        assert rep.c_hat == pytest.approx(0.0, abs=1e-12)
        assert not rep.breaches

    def test_breach(self):
        rep = matching_diagnostic(density([0.5, 0.5]), two_atom([1, 0], [0, 1]), 20, 4, 3)
        assert rep.breaches and all(b[2] >= 2 for b in rep.breaches)


class TestConstructors:
    def test_one_element_family(self):
        pr = net_prior([density([0.3, 0.7])], "hellinger", [0.5, 0.1], [0.5, 0.5])
        np.testing.assert_array_equal(pr.masses, [1.0])

    def test_net_collapse(self):
        fam = [density([1, 0, 0]), density([0, 1, 0]), density([0, 0, 1])]
        pr = net_prior(fam, "tv", [2.0, 0.5], [0.5, 0.5])
        assert pr.metadata["nets"][0].tolist() == [0]
        assert len(pr.metadata["nets"][1]) == 3

    def test_greedy_net_covers(self, rng):
        pts = rng.random((40, 2))
        dist = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
        c = greedy_net(dist, 0.2)
        assert np.all(dist[:, c].min(axis=1) < 0.2)

    def test_bernoulli_ball_mass(self):
        m = build_bernoulli(0.01, 0.3)
        fam = DiscretePrior(m.grid, m.densities, np.full(99, 1 / 99))
        eta = [2.0 ** -k for k in range(1, 8)]
        lam = [2.0 ** -k for k in range(1, 7)] + [2.0 ** -6]
        pr = net_prior(fam, "hellinger", eta, lam)
        H = pairwise_divergence("hellinger", m.densities, m.densities, m.grid.cell_mass)
        mstar = next(i for i, e in enumerate(eta) if e < 0.1)
        floor = lam[mstar] / len(pr.metadata["nets"][mstar])
        ball = (H < 0.1) @ pr.masses
        assert np.all(ball >= floor - 1e-15)

    def test_stick_breaking(self):
        base = GridDensity(DominatingGrid(np.linspace(-1, 1, 11)), np.full(11, 1 / 11))
        g = DominatingGrid.uniform(11)

        def kernel(z):
            v = np.zeros(11)
            v[int(round((z + 1) * 5))] = 1.0
            return GridDensity(g, v)

        one = stick_breaking_prior(base, 1.0, 1, kernel, 20, 5)
        assert np.all(np.isin(one.densities, [0.0, 1.0]))
        pr = stick_breaking_prior(base, 1.0, 5, kernel, 30, 5)
        np.testing.assert_allclose(pr.densities @ g.cell_mass, 1.0, atol=1e-10)
        for lab in pr.labels:
            assert lab["weights"].sum() == pytest.approx(1.0, abs=1e-15)
        tiny = stick_breaking_prior(base, 1e-3, 4, kernel, 200, 8)
        assert np.median([lab["weights"][0] for lab in tiny.labels]) > 0.99


def test_oracle_posterior_ratio():
    p0 = [Fraction(1, 2), Fraction(1, 2)]
    atoms = [[Fraction(1, 3), Fraction(2, 3)], [Fraction(1, 2), Fraction(1, 2)]]
    w = [Fraction(1, 2), Fraction(1, 2)]
    assert brute_force_posterior_expectation(p0, atoms, w, 0, [0]) == Fraction(1, 2)
    val = brute_force_posterior_expectation(p0, atoms, w, 3, [0])
    pr = DiscretePrior(DominatingGrid.uniform(2), np.array(atoms, float), np.array(w, float))
    approx = sum(posterior_update(PosteriorState.initial(pr), list(x)).masses()[0] / 8
                 for x in itertools.product(range(2), repeat=3))
    assert float(val) == pytest.approx(approx, abs=1e-12)
