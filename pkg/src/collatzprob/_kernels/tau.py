"""Stopping-time table kernels.

Both kernels fill ``out[n] = tau(n)`` for ``1 <= n < len(out)``; ``out[0]`` is
left at zero. Return codes from the jitted kernels:

    0   success
    -1  3x+1 would overflow int64
    -2  a stopping time does not fit in ``out``'s dtype
    -3  a trajectory failed to drop below its start within ``step_guard`` steps
"""

import numpy as np

from .._accel import njit, prange

# largest x for which 3x + 1 still fits in int64
OVERFLOW_LIMIT = (np.iinfo(np.int64).max - 1) // 3
STEP_GUARD = 1_000_000


@njit(cache=True)
def fill_sequential(out, vmax, step_guard):
    n_max = out.shape[0] - 1
    limit = (np.iinfo(np.int64).max - 1) // 3
    for i in range(2, n_max + 1):
        x = np.int64(i)
        k = 0
        while x >= i:
            if x & 1:
                if x > limit:
                    return -1
                x = 3 * x + 1
            else:
                x >>= 1
            k += 1
            if k > step_guard:
                return -3
        t = k + np.int64(out[x])
        if t > vmax:
            return -2
        out[i] = t
    return 0


@njit(cache=True, parallel=True)
def fill_parallel(out, vmax, step_guard, n_chunks):
    """Chunked fill.

    The prefix ``[1, base)`` is filled sequentially first. Each later chunk
    only trusts indices below ``base`` or below ``i`` inside its own chunk;
    any other landing point is iterated through directly.
    """
    n_max = out.shape[0] - 1
    limit = (np.iinfo(np.int64).max - 1) // 3
    base = min(n_max + 1, max(2, int(np.sqrt(n_max)) + 1))
    for i in range(2, base):
        x = np.int64(i)
        k = 0
        while x >= i:
            if x & 1:
                if x > limit:
                    return -1
                x = 3 * x + 1
            else:
                x >>= 1
            k += 1
            if k > step_guard:
                return -3
        out[i] = k + np.int64(out[x])
    span = n_max + 1 - base
    if span <= 0:
        return 0
    size = (span + n_chunks - 1) // n_chunks
    codes = np.zeros(n_chunks, dtype=np.int64)
    for c in prange(n_chunks):
        lo = base + c * size
        hi = min(n_max + 1, lo + size)
        for i in range(lo, hi):
            x = np.int64(i)
            k = 0
            while True:
                if x < base or (x >= lo and x < i):
                    break
                if x == 1:
                    break
                if x & 1:
                    if x > limit:
                        codes[c] = -1
                        break
                    x = 3 * x + 1
                else:
                    x >>= 1
                k += 1
                if k > step_guard:
                    codes[c] = -3
                    break
            if codes[c] != 0:
                break
            t = k + np.int64(out[x])
            if t > vmax:
                codes[c] = -2
                break
            out[i] = t
    for c in range(n_chunks):
        if codes[c] != 0:
            return codes[c]
    return 0


def fill_numpy(out, vmax, step_guard=STEP_GUARD, chunk=1 << 18):
    """Vectorized fallback, chunk by chunk in increasing n.

    Each start glides until it first drops below itself, landing at m < n, so
    tau(n) = k + tau(m) with tau(m) either already in ``out`` or earlier in
    the same chunk. Memory stays proportional to ``chunk``.
    """
    n_max = out.shape[0] - 1
    if n_max < 2:
        return 0
    for lo in range(2, n_max + 1, chunk):
        hi = min(n_max + 1, lo + chunk)
        start = np.arange(lo, hi, dtype=np.int64)
        steps = np.zeros(hi - lo, dtype=np.int64)
        land = np.empty(hi - lo, dtype=np.int64)
        x = start.copy()
        k = np.zeros_like(x)
        idx = np.arange(x.size)
        for _ in range(step_guard):
            odd = (x & 1).astype(bool)
            if np.any(x[odd] > OVERFLOW_LIMIT):
                return -1
            x = np.where(odd, 3 * x + 1, x >> 1)
            k += 1
            done = x < start
            if done.any():
                steps[idx[done]] = k[done]
                land[idx[done]] = x[done]
                keep = ~done
                x, k, start, idx = x[keep], k[keep], start[keep], idx[keep]
            if x.size == 0:
                break
        else:
            return -3
        tau = np.full(hi - lo, -1, dtype=np.int64)
        below = land < lo
        tau[below] = steps[below] + out[land[below]]
        pending = np.flatnonzero(~below)
        # the smallest pending start always lands on a resolved entry
        while pending.size:
            ref = tau[land[pending] - lo]
            ready = ref >= 0
            tau[pending[ready]] = steps[pending[ready]] + ref[ready]
            pending = pending[~ready]
        if tau.max() > vmax:
            return -2
        out[lo:hi] = tau
    return 0
