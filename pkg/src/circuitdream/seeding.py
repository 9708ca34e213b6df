import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary printable parts (independent of PYTHONHASHSEED)."""
    blob = "\x1f".join(repr(p) for p in parts).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little") >> 1


def child_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for the ``index``-th independent stream under ``seed``.

    Stream ``k`` does not depend on how many streams are drawn in total.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
