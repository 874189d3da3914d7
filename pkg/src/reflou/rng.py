"""Counter-based random streams keyed by integer tuples.

Every stream is a Philox generator whose key is derived from
``(seed, *key)``; nothing is shared between streams, so a path's noise
depends only on the seed and its own indices, never on batching or on the
number of workers.
"""

import numpy as np

# stream tags, first key component after the seed
NOISE = 0
START = 1
ORACLE = 2
AUX = 3

# noise is generated in fixed tiles of PATH_GROUP paths x STEP_BLOCK steps
PATH_GROUP = 256
STEP_BLOCK = 512


def stream(seed, *key):
    """Independent generator for the key ``(seed, *key)``."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), *(int(k) for k in key)])
    return np.random.Generator(np.random.Philox(key=ss.generate_state(2, np.uint64)))


def noise_tile(seed, group, block, dim):
    """Standard normals for one (path group, step block) tile, shape (PATH_GROUP, STEP_BLOCK, dim)."""
    return stream(seed, NOISE, group, block).standard_normal((PATH_GROUP, STEP_BLOCK, dim))


def block_noise(seed, paths, block, dim):
    """Noise for the given path indices over one step block, shape (len(paths), STEP_BLOCK, dim).

    Row ``i`` is a pure function of ``(seed, paths[i], step)``.
    """
    paths = np.asarray(paths, dtype=np.int64)
    out = np.empty((paths.size, STEP_BLOCK, dim))
    groups = paths // PATH_GROUP
    for g in np.unique(groups):
        sel = np.nonzero(groups == g)[0]
        out[sel] = noise_tile(seed, g, block, dim)[paths[sel] % PATH_GROUP]
    return out
