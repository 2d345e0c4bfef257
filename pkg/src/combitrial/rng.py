"""Counter-based random streams.

A stream is fully determined by a root seed and an integer key path, so
replicate ``k`` always sees the same numbers no matter which worker runs it
or in what order.
"""

from __future__ import annotations

import numpy as np

DEFAULT_SEED = 20201


def stream(root: int, *key: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(root), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def entropy_seed() -> int:
    return int(np.random.SeedSequence().entropy % 2**64)
