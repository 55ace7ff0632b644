"""Seeded random streams and an order-preserving replication runner.

Every replication draws from its own generator, derived from the pair
``(seed, replication_index)`` by numpy's ``SeedSequence`` hash (a fixed,
documented 64-bit mixing of the entropy and spawn key).  Results therefore do
not depend on how replications are scheduled across workers.
"""

from concurrent.futures import ProcessPoolExecutor

import numpy as np

MAX_SEED = 2**64 - 1


def check_seed(seed):
    if seed is None:
        raise ValueError("a seed is required; runs never draw entropy from the environment")
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def stream(seed, *key):
    """Independent generator for ``(seed, *key)``; same inputs, same stream."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def gaussian(seed, rep, n, sigma=1.0):
    """The noise vector ``z ~ N(0, sigma^2 I_n)`` of replication ``rep``."""
    return sigma * stream(seed, rep).standard_normal(n)


def run_replications(fn, reps, workers=1, chunksize=None):
    """``[fn(r) for r in range(reps)]`` evaluated on up to ``workers`` processes.

    ``fn`` must be picklable when ``workers > 1``.  Output order is always
    replication order, so any reduction over it is deterministic.
    """
    if workers is None or workers <= 1 or reps < 2:
        return [fn(r) for r in range(reps)]
    chunksize = chunksize or max(1, reps // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(reps), chunksize=chunksize))


def mean_stderr(values, axis=0):
    """Sample mean and standard error (ddof=1) along ``axis``."""
    values = np.asarray(values, dtype=float)
    m = values.shape[axis]
    mean = values.mean(axis=axis)
    if m < 2:
        return mean, np.zeros_like(mean)
    return mean, values.std(axis=axis, ddof=1) / np.sqrt(m)
