"""
Seeded random streams.

Every field and Monte Carlo batch draws from a Philox counter-based
generator; replicate seeds are derived from (master seed, degree, replicate)
so new degrees or replicates never perturb existing ones.
"""

import numpy as np

SEED_LIMIT = 2**64


def check_seed(seed: int) -> int:
    if not 0 <= int(seed) < SEED_LIMIT:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return int(seed)


def generator(seed: int) -> np.random.Generator:
    """Philox generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(check_seed(seed)))


def replicate_seed(master_seed: int, ell: int, replicate: int) -> int:
    """Seed of replicate r at degree ell."""
    seq = np.random.SeedSequence(check_seed(master_seed), spawn_key=(ell, replicate))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def stream(seed: int, key: int) -> np.random.Generator:
    """Independent sub-stream `key` of a seed (Monte Carlo chunks)."""
    seq = np.random.SeedSequence(check_seed(seed), spawn_key=(key,))
    return np.random.Generator(np.random.Philox(seq))
