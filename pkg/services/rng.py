"""
Named random streams.

Every random quantity in the lab is drawn from a Philox (counter-based)
generator keyed by (seed, stream id, extra keys). Streams never share
state, so the same design can carry different noise draws and reordering
the work never changes a result.
"""

from typing import Dict

import numpy as np

STREAMS: Dict[str, int] = {
    "design": 0,
    "noise": 1,
    "coefficients": 2,
    "partition": 3,
    "init": 4,
}


def stream(seed: int, name: str, *keys: int) -> np.random.Generator:
    spawn_key = (STREAMS[name],) + tuple(int(k) for k in keys)
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(sequence))


def cell_seed(master_seed: int, n: int, rep: int) -> int:
    """Per-cell seed derived from (master seed, n, rep) only."""
    state = np.random.SeedSequence([int(master_seed), int(n), int(rep)]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 31 | int(state[1]) >> 1


def derive_seed(seed: int, name: str, *keys: int) -> int:
    """Seed for a sub-object (a boundary, a piece function) of a seeded object."""
    spawn_key = (STREAMS[name],) + tuple(int(k) for k in keys)
    state = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key).generate_state(1, dtype=np.uint32)
    return int(state[0])
