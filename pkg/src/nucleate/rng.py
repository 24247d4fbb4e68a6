"""Counter-seeded xoshiro256** streams usable inside numba kernels.

Each replica gets its own stream keyed by ``(seed, replica)`` through SplitMix64,
so results never depend on how replicas are scheduled across threads.
"""

from __future__ import annotations

import os

import numba as nb
import numpy as np

if "NUMBA_THREADING_LAYER" not in os.environ:
    # prefer OpenMP; an outdated TBB otherwise triggers a warning on every run
    nb.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


@nb.njit(cache=True)
def splitmix64(x):
    z = x + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def stream_key(seed, index):
    # hashing both parts avoids the collisions of seed ^ index
    return splitmix64(splitmix64(np.uint64(seed)) ^ splitmix64(np.uint64(index) * _GOLDEN + np.uint64(1)))


@nb.njit(cache=True)
def seed_state(state, key):
    x = key
    for i in range(4):
        x = splitmix64(x)
        state[i] = x
        x = x + np.uint64(i + 1)


@nb.njit(cache=True)
def new_state(seed, index):
    s = np.empty(4, dtype=np.uint64)
    seed_state(s, stream_key(seed, index))
    return s


@nb.njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@nb.njit(cache=True)
def next_u64(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@nb.njit(cache=True)
def uniform(s):
    """Uniform on ``[0, 1)`` with 53 random bits."""
    return float(next_u64(s) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True)
def exponential(s, rate):
    return -np.log(1.0 - uniform(s)) / rate


@nb.njit(cache=True)
def randint(s, n):
    """Uniform integer in ``[0, n)``."""
    return int(uniform(s) * n)


@nb.njit(cache=True)
def normal(s):
    # Box-Muller, one value per call keeps the stream position simple
    u1 = 1.0 - uniform(s)
    u2 = uniform(s)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def configure_threads() -> int:
    """Apply ``NUCLEATE_THREADS`` to numba; returns the thread count in use."""
    value = os.environ.get("NUCLEATE_THREADS")
    if value:
        n = max(1, min(int(value), nb.config.NUMBA_NUM_THREADS))
        nb.set_num_threads(n)
    return nb.get_num_threads()
