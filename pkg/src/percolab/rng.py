"""Counter-based uniforms keyed on (seed, trial, vertex key).

Every draw is a pure function of its key triple, so adding vertices to an
enumeration or splitting trials across workers never perturbs other draws.
The mixer is the SplitMix64 finaliser applied in three chained stages.
"""

import numba
import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


@numba.njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, inline="always")
def u01(seed, trial, key):
    """Uniform double in [0, 1) for one (seed, trial, key) triple (all uint64)."""
    g = np.uint64(_GOLDEN)
    h = _mix64(seed + g)
    h = _mix64(h + trial + g)
    h = _mix64(h + key + g)
    return np.float64(h >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True)
def _uniform_block(seed, trial0, ntrials, keys, out):
    for t in range(ntrials):
        tr = trial0 + np.uint64(t)
        for j in range(keys.shape[0]):
            out[t, j] = u01(seed, tr, keys[j])


def as_seed(seed):
    return np.uint64(int(seed) & _MASK)


def _mix_py(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def fold_key(k):
    """Reduce an arbitrary non-negative int vertex key to 64 bits."""
    k = int(k)
    while k > _MASK:
        k = (k & _MASK) ^ _mix_py(k >> 64)
    return k


def uniforms(seed, keys, trial0=0, ntrials=1):
    """Array of shape (ntrials, len(keys)) of per-vertex uniforms."""
    keys = np.ascontiguousarray(keys, dtype=np.uint64)
    out = np.empty((ntrials, keys.shape[0]), dtype=np.float64)
    _uniform_block(as_seed(seed), np.uint64(trial0), ntrials, keys, out)
    return out
