"""Deterministic seed derivation.

Every stochastic component takes an explicit seed or generator.  Derived
streams (per restart, per scoring pass, ...) are spawned from a base seed
plus string/int tags so that results are reproducible bit-for-bit and
independent of worker count.
"""

import zlib

import numpy as np

_U64 = (1 << 64) - 1
_U32 = (1 << 32) - 1


def _tag_word(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & _U32
    return zlib.crc32(str(tag).encode("utf-8"))


def seed_sequence(base_seed: int, *tags) -> np.random.SeedSequence:
    """SeedSequence for ``base_seed`` refined by a tuple of tags.

    Tags may be ints or strings; strings are hashed with crc32 so the
    derivation is stable across runs and platforms.
    """
    key = tuple(_tag_word(t) for t in tags)
    return np.random.SeedSequence(entropy=int(base_seed) & _U64, spawn_key=key)


def rng_from(base_seed: int, *tags) -> np.random.Generator:
    """Fresh generator for ``(base_seed, *tags)``."""
    return np.random.default_rng(seed_sequence(base_seed, *tags))


def derive_seed(base_seed: int, *tags) -> int:
    """Stable derived integer seed for components that take plain ints."""
    return int(seed_sequence(base_seed, *tags).generate_state(1, np.uint64)[0])
