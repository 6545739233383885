"""Estimator wrapper around the discrete posterior."""

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .bayes import DiscretePrior, PosteriorState, log_posterior_mass, posterior_update
from .measures import safe_log
from .validation import check_observations

__all__ = ["DiscretePosterior"]


class DiscretePosterior(BaseEstimator):
    """Posterior of a finitely supported prior, with an estimator interface.

    Parameters
    ----------
    prior : DiscretePrior
    target : callable, bool array or index array, optional
        Atom subset whose posterior mass :meth:`score` reports.

    Attributes
    ----------
    state_ : PosteriorState
    posterior_ : ndarray
        Normalized posterior masses over the prior atoms.
    n_observed_ : int

    Examples
    --------
    >>> import numpy as np
    >>> from postcons.measures import DominatingGrid
    >>> from postcons.bayes import DiscretePrior
    >>> g = DominatingGrid.uniform(2)
    >>> prior = DiscretePrior(g, [[0.9, 0.1], [0.5, 0.5]], [0.5, 0.5])
    >>> DiscretePosterior(prior).fit([0]).posterior_.round(4)
    array([0.6429, 0.3571])
    """

    def __init__(self, prior=None, target=None):
        self.prior = prior
        self.target = target

    def _check_prior(self):
        if not isinstance(self.prior, DiscretePrior):
            raise TypeError("prior must be a DiscretePrior")
        return self.prior

    def fit(self, X, y=None):
        """Compute the posterior given observations ``X`` (grid indices)."""
        prior = self._check_prior()
        self.state_ = posterior_update(PosteriorState.initial(prior), X)
        self._sync()
        return self

    def partial_fit(self, X, y=None):
        """Continue updating the current posterior with more observations."""
        if not hasattr(self, "state_"):
            self.state_ = PosteriorState.initial(self._check_prior())
        self.state_ = posterior_update(self.state_, X)
        self._sync()
        return self

    def _sync(self):
        self.posterior_ = self.state_.masses()
        self.n_observed_ = self.state_.n_observed

    def posterior_mass(self, subset=None, log=False):
        """Posterior mass of ``subset`` (defaults to ``target``)."""
        check_is_fitted(self, "state_")
        subset = self.target if subset is None else subset
        lm = log_posterior_mass(self.state_, subset)
        return lm if log else float(np.exp(lm))

    def score_samples(self, X):
        """Log posterior-predictive density of each observation."""
        check_is_fitted(self, "state_")
        x = check_observations(X, self.prior.grid.size)
        lw = self.state_.log_weights - logsumexp(self.state_.log_weights)
        with np.errstate(invalid="ignore"):
            return logsumexp(lw[:, None] + self.prior.log_densities[:, x], axis=0)

    def score(self, X, y=None):
        """Total log posterior-predictive density of ``X``."""
        return float(np.sum(self.score_samples(X)))

    def predict(self, X=None):
        """Index of the posterior mode (lowest index on ties)."""
        check_is_fitted(self, "state_")
        return int(np.argmax(self.state_.log_weights))
