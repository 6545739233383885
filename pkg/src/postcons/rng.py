"""Seeded random streams.

Every stream is a numpy ``Generator`` on the counter-based Philox bit
generator.  A replication stream is obtained from the experiment's master
seed by ``SeedSequence(master_seed, spawn_key=(replication,))``; the 64-bit
integer written to result tables is the first word of that sequence's
state, and ``make_generator(that_integer)`` reproduces the stream.
"""

import numpy as np

__all__ = ["make_generator", "replication_seed", "replication_generator"]


def make_generator(seed):
    """Return a Philox-backed generator.

    Parameters
    ----------
    seed : int, numpy.random.Generator or numpy.random.SeedSequence
        Generators are passed through untouched.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    if seed is None:
        raise ValueError("an explicit seed is required")
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def replication_seed(master_seed, replication):
    """64-bit seed of replication ``replication`` under ``master_seed``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(replication),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def replication_generator(master_seed, replication):
    return make_generator(replication_seed(master_seed, replication))
