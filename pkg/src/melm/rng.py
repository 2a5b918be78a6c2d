"""Seeded random streams keyed by (master seed, stage, indices...).

Every stochastic step draws from a stream derived from its own key, so work
can be split across any number of workers and still reproduce serial output.
"""
import zlib

import numpy as np


def _key(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def derive_rng(seed, *keys):
    entropy = [_key(seed)] + [_key(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def derive_seed(seed, *keys):
    """A 63-bit integer seed for libraries that want a plain int (torch)."""
    return int(derive_rng(seed, *keys).integers(0, 2**63 - 1))
