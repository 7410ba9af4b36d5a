"""Namespaced RNG streams.

Every stream is keyed by (root seed, *string labels) so that adding a new
consumer (e.g. another baseline method) never perturbs an existing stream.
"""

import zlib

import numpy as np


def _code(label) -> int:
    if isinstance(label, int):
        return label & 0xFFFFFFFF
    return zlib.crc32(str(label).encode("utf-8"))


def derive_rng(root_seed: int, *labels) -> np.random.Generator:
    """Return a Generator unique to (root_seed, labels)."""
    entropy = [int(root_seed) & 0xFFFFFFFF] + [_code(l) for l in labels]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(root_seed: int, *labels) -> int:
    """Return a plain integer seed unique to (root_seed, labels)."""
    return int(derive_rng(root_seed, *labels).integers(0, 2**31 - 1))
