"""Exact single-pass moments of nonnegative integer data."""

import numpy as np

from .._accel import njit


@njit(cache=True)
def moments_jit(values):
    s = np.int64(0)
    s2 = np.int64(0)
    lo = np.int64(values[0])
    hi = lo
    for i in range(values.shape[0]):
        v = np.int64(values[i])
        s += v
        s2 += v * v
        if v < lo:
            lo = v
        if v > hi:
            hi = v
    return values.shape[0], s, s2, lo, hi


def moments_numpy(values, chunk=1 << 20):
    s = s2 = 0
    lo, hi = None, None
    for i in range(0, values.shape[0], chunk):
        v = values[i : i + chunk].astype(np.int64)
        s += int(v.sum())
        s2 += int((v * v).sum())
        lo = int(v.min()) if lo is None else min(lo, int(v.min()))
        hi = int(v.max()) if hi is None else max(hi, int(v.max()))
    return values.shape[0], s, s2, lo, hi
