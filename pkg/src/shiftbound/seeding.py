"""Named, collision-free random substreams derived from integer seeds.

Every stochastic component draws from its own substream so that, e.g.,
changing the number of training epochs (which consumes shuffle draws)
cannot perturb weight initialisation or posterior sampling.
"""

import numpy as np

_U64 = (1 << 64) - 1

_STREAMS = {
    "init": 0,
    "shuffle": 1,
    "split": 2,
    "posterior": 3,
    "mmd": 4,
    "task": 5,
    "derive": 6,
}


def stream_rng(seed: int, stream: str, *key: int) -> np.random.Generator:
    """Generator for the named substream of ``seed``, optionally keyed
    by extra integers (e.g. a checkpoint index)."""
    if stream not in _STREAMS:
        raise ValueError(f"unknown stream {stream!r}")
    ss = np.random.SeedSequence(
        entropy=int(seed) & _U64, spawn_key=(_STREAMS[stream], *map(int, key))
    )
    return np.random.default_rng(ss)


def derive_seed(seed: int, *key: int) -> int:
    """Stable child seed for components that take their own integer seed."""
    ss = np.random.SeedSequence(
        entropy=int(seed) & _U64, spawn_key=(_STREAMS["derive"], *map(int, key))
    )
    return int(ss.generate_state(1, dtype=np.uint64)[0])
