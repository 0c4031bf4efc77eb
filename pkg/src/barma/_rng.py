"""Counter-based random streams keyed by (seed, index...).

Each logical task (Monte Carlo replicate, bootstrap replicate) gets its own
Philox stream derived from the master seed and its index, so results never
depend on scheduling or worker count.
"""

from __future__ import annotations

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(seed: int, *key: int) -> int:
    """Stable 64-bit sub-seed for nested engines."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    state = seq.generate_state(2, dtype=np.uint64)
    return int(state[0] ^ (state[1] << np.uint64(1)) & np.uint64(0x7FFFFFFFFFFFFFFF))
