"""Per-replicate random streams.

Replicate ``r`` of a run seeded with ``master_seed`` draws from PCG64 seeded
by ``SeedSequence(master_seed, spawn_key=(r,))``.  SeedSequence hashes its
entropy and spawn key through a 32-bit-word avalanche mix, so neighbouring
replicates get unrelated streams and no state is shared between workers.
"""

import numpy as np

SEED_MASK = (1 << 64) - 1


def replicate_seed_sequence(master_seed: int, replicate: int) -> np.random.SeedSequence:
    if master_seed < 0 or replicate < 0:
        raise ValueError("seeds and replicate indices must be nonnegative")
    return np.random.SeedSequence(int(master_seed) & SEED_MASK, spawn_key=(int(replicate),))


def replicate_rng(master_seed: int, replicate: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(replicate_seed_sequence(master_seed, replicate)))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
