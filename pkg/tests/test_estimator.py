import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from postcons.bayes import DiscretePrior
from postcons.estimator import DiscretePosterior
from postcons.measures import DominatingGrid


@pytest.fixture
def prior():
    return DiscretePrior(DominatingGrid.uniform(2), [[0.9, 0.1], [0.5, 0.5]], [0.5, 0.5])


class TestDiscretePosterior:
    def test_fit(self, prior):
        est = DiscretePosterior(prior, target=[0]).fit([0])
        assert est.posterior_mass() == pytest.approx(0.45 / 0.7)
        assert est.n_observed_ == 1
        assert est.predict() == 0

    def test_partial_fit_matches_fit(self, prior):
        x = [0, 1, 1, 0, 0, 1]
        a = DiscretePosterior(prior).fit(x)
        b = DiscretePosterior(prior).partial_fit(x[:2]).partial_fit(x[2:])
        np.testing.assert_array_equal(a.posterior_, b.posterior_)

    def test_refit_resets(self, prior):
        est = DiscretePosterior(prior).fit([1, 1, 1])
        est.fit([0])
        assert est.n_observed_ == 1

    def test_score(self, prior):
        est = DiscretePosterior(prior).fit([])
        assert est.score([0]) == pytest.approx(np.log(0.7))
        assert est.score_samples([0, 1]).shape == (2,)

    def test_not_fitted(self, prior):
        with pytest.raises(NotFittedError):
            DiscretePosterior(prior).posterior_mass([0])

    def test_clone_and_params(self, prior):
        est = DiscretePosterior(prior, target=[1])
        c = clone(est)
        assert c.get_params()["target"] == [1]
        np.testing.assert_array_equal(c.prior.masses, prior.masses)

    def test_bad_prior(self):
        with pytest.raises(TypeError):
            DiscretePosterior("nope").fit([0])
