"""Stochastic odd-block simulation kernels.

Trajectory ``i`` starts at ``ns[i]`` with splitmix state ``states[i]`` and
draws block lengths by inverse CDF from ``cdf[table[i], M % 8]``. The odd
update is exact: round-half-even of (3M + 1) / 2**K computed in integers,
then pushed to the next odd number (or clamped to 1).

Outputs: ``tau[i]`` (-1 when not absorbed) and ``steps[i]`` (steps taken).
"""

import numpy as np

from .._accel import njit
from .rng import GOLDEN, mix64, mix64_np, to_unit, to_unit_np

ESCAPE_LIMIT = (np.iinfo(np.int64).max - 1) // 3


@njit(cache=True)
def odd_update(m, k):
    t = 3 * m + 1
    q = t >> k
    half = np.int64(1) << (k - 1)
    rem = t & ((np.int64(1) << k) - 1)
    if rem > half or (rem == half and (q & 1) == 1):
        q += 1
    if q <= 1:
        return np.int64(1)
    if q & 1:
        return q
    return q + 1


@njit(cache=True)
def simulate_jit(ns, states, cdf, table, max_steps, tau, steps):
    kmax = cdf.shape[2]
    limit = (np.iinfo(np.int64).max - 1) // 3
    for i in range(ns.shape[0]):
        n = ns[i]
        h = 0
        while (n & 1) == 0:
            n >>= 1
            h += 1
        m = n
        total = np.int64(h)
        state = states[i]
        row = table[i]
        absorbed = True
        while m != 1:
            if total > max_steps or m > limit:
                absorbed = False
                break
            state = state + GOLDEN
            u = to_unit(mix64(state))
            r = m & 7
            k = kmax
            for j in range(kmax):
                if u < cdf[row, r, j]:
                    k = j + 1
                    break
            total += 1 + k
            m = odd_update(m, k)
        if absorbed and m == 1:
            tau[i] = total
        else:
            tau[i] = -1
        steps[i] = total


def simulate_numpy(ns, states, cdf, table, max_steps, tau, steps):
    kmax = cdf.shape[2]
    n = np.asarray(ns, dtype=np.int64).copy()
    low = n & -n
    h = np.log2(low.astype(np.float64)).astype(np.int64)
    m = n >> h
    total = h.copy()
    state = np.asarray(states, dtype=np.uint64).copy()
    tau[:] = -1
    act = np.flatnonzero(m != 1)
    tau[m == 1] = total[m == 1]
    steps[:] = total
    while act.size:
        out = (total[act] > max_steps) | (m[act] > ESCAPE_LIMIT)
        if out.any():
            steps[act[out]] = total[act[out]]
            act = act[~out]
            if act.size == 0:
                break
        with np.errstate(over="ignore"):
            state[act] = state[act] + GOLDEN
        u = to_unit_np(mix64_np(state[act]))
        rows = cdf[table[act], m[act] & 7]
        k = np.minimum(1 + (u[:, None] >= rows).sum(axis=1), kmax).astype(np.int64)
        total[act] += 1 + k
        mm = m[act]
        t = 3 * mm + 1
        q = t >> k
        half = np.int64(1) << (k - 1)
        rem = t & ((np.int64(1) << k) - 1)
        q = q + ((rem > half) | ((rem == half) & ((q & 1) == 1)))
        q = np.where(q <= 1, 1, np.where(q & 1, q, q + 1))
        m[act] = q
        done = q == 1
        tau[act[done]] = total[act[done]]
        steps[act[done]] = total[act[done]]
        act = act[~done]
