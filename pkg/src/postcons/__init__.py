"""Posterior consistency on finite grids.

Discrete divergences and Hellinger transforms, exact posterior updating for
finitely supported priors, numerical certificates for the testing
conditions of the consistency theorems, concrete model families and a
seeded simulation harness.
"""

from .bayes import DiscretePrior, PosteriorState, posterior_mass, posterior_update
from .certify import Certificate, Cover, certify_main
from .estimator import DiscretePosterior
from .exceptions import PostconsError
from .measures import DominatingGrid, GridDensity, divergence
from .transforms import SolverOptions, hellinger_transform, ht_bound_iid, testing_power

__version__ = "0.1.0"

__all__ = [
    "Certificate",
    "Cover",
    "DiscretePosterior",
    "DiscretePrior",
    "DominatingGrid",
    "GridDensity",
    "PosteriorState",
    "PostconsError",
    "SolverOptions",
    "certify_main",
    "divergence",
    "hellinger_transform",
    "ht_bound_iid",
    "posterior_mass",
    "posterior_update",
    "testing_power",
]
