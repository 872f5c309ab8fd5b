"""Block-length histogram kernels: counts[m % 8, min(v2(3m+1), k_cap) - 1]."""

import numpy as np

from .._accel import njit


@njit(cache=True)
def count_jit(n_max, k_cap):
    counts = np.zeros((8, k_cap), dtype=np.int64)
    for m in range(1, n_max + 1, 2):
        t = 3 * np.int64(m) + 1
        k = 0
        while (t & 1) == 0:
            t >>= 1
            k += 1
        if k > k_cap:
            k = k_cap
        counts[m & 7, k - 1] += 1
    return counts


def trailing_zeros(t):
    """v2 of a positive int64 array."""
    low = t & -t
    return np.log2(low.astype(np.float64)).astype(np.int64)


def count_numpy(n_max, k_cap, chunk=1 << 21):
    counts = np.zeros(8 * k_cap, dtype=np.int64)
    for lo in range(1, n_max + 1, 2 * chunk):
        m = np.arange(lo, min(n_max + 1, lo + 2 * chunk), 2, dtype=np.int64)
        k = np.minimum(trailing_zeros(3 * m + 1), k_cap)
        counts += np.bincount((m & 7) * k_cap + k - 1, minlength=8 * k_cap)
    return counts.reshape(8, k_cap)
