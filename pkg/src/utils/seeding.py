"""Seed derivation shared by every stochastic component.

All randomness in the package flows from integer seeds combined with integer
keys (mode index, draw index, layer index, ...). Using numpy's SeedSequence
keeps derived streams independent and makes every run a pure function of its
configuration.
"""
import numpy as np


def derive_seed(seed: int, *keys: int) -> int:
    """Derive a 64-bit seed from a base seed and a path of integer keys.

    Args:
        seed: Base seed (any non-negative integer)
        *keys: Integer keys, e.g. (mode_index,) or (mode_index, draw_index)

    Returns:
        A deterministic 64-bit unsigned integer
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Create a generator for the stream identified by (seed, *keys)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys)))
