"""Named RNG sub-streams derived from one master seed.

Every source of randomness (splits, init, dropout, noise) pulls from its own
named stream, so toggling one feature never perturbs the draws of another.
"""

import hashlib

import numpy as np


def _tag_to_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFF
    digest = hashlib.blake2s(str(tag).encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "little")


def rng_for(master_seed: int, *tags) -> np.random.Generator:
    """Generator for the sub-stream identified by ``tags`` under ``master_seed``.

    Same (seed, tags) -> bit-identical stream, on any platform.
    """
    entropy = [int(master_seed) & 0xFFFFFFFFFFFFFFFF] + [_tag_to_int(t) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(entropy))
