"""Named, independent random streams built on Philox.

Every stream is derived from a root seed plus an integer key, so adding a
new consumer never shifts the draws seen by existing ones.
"""
import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def spawn(seed: int, n: int) -> list:
    return [stream(seed, i) for i in range(n)]
