"""Exception hierarchy shared by all postcons modules."""


class PostconsError(Exception):
    """Base class for every error raised by this package."""


class DegenerateInputError(PostconsError, ValueError):
    pass


class IncompatibleGridError(PostconsError, ValueError):
    pass


class InvalidConditioningError(PostconsError, ValueError):
    """Conditioning on a set of zero prior mass."""


class ConfigurationError(PostconsError, ValueError):
    pass


class OutOfDomainError(PostconsError, ValueError):
    pass


class InstanceTooLargeError(PostconsError, ValueError):
    pass


class UndefinedSequenceError(PostconsError, ValueError):
    """Both likelihoods of an observation sequence vanish."""


class IllDefinedPosteriorError(PostconsError, ArithmeticError):
    """Every prior atom assigns likelihood zero to the data.

    Attributes
    ----------
    index : int
        Position (0-based, within the batch passed to the update) of the
        first observation after which no atom has positive likelihood.
    n_observed : int
        Total sample size at which the posterior became undefined.
    """

    def __init__(self, index, n_observed, message=None):
        self.index = index
        self.n_observed = n_observed
        if message is None:
            message = (f"posterior undefined: all atoms have zero likelihood "
                       f"after observation {index} (n={n_observed})")
        super().__init__(message)
