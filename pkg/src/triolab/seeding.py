"""Named random streams split off one master seed.

Each component draws from its own stream so swapping one component (say, the
GP restart search) never perturbs the draws seen by another.
"""

from __future__ import annotations

import numpy as np

_STREAM_IDS = {
    "env": 0,
    "task": 1,
    "policy": 2,
    "policy_init": 3,
    "inference_init": 4,
    "gp": 5,
    "hyperprior": 6,
}


def stream(master_seed: int, name: str, index: int = 0) -> np.random.Generator:
    """Generator for the named stream; `index` selects a substream."""
    if name not in _STREAM_IDS:
        raise KeyError(f"unknown stream name {name!r}; known: {sorted(_STREAM_IDS)}")
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(_STREAM_IDS[name], index))
    return np.random.Generator(np.random.PCG64(seq))
