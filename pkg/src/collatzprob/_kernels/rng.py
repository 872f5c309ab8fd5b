"""Counter-based splitmix64 streams.

Pure uint64 arithmetic, so the jitted and numpy code paths draw identical
numbers for the same (seed, key, replicate, step) coordinates.
"""

import numpy as np

from .._accel import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def to_unit(z):
    return np.float64(z >> _S11) * _INV53


def mix64_np(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def to_unit_np(z):
    return (np.asarray(z, dtype=np.uint64) >> _S11).astype(np.float64) * _INV53


def stream_keys(seed, indices):
    """One uint64 key per point index, independent of batching order."""
    s = mix64_np(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    idx = np.asarray(indices, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64_np(s ^ mix64_np(idx * GOLDEN + GOLDEN))


def replicate_states(keys, n_rep):
    """Initial splitmix state for each (key, replicate) pair, row-major."""
    keys = np.asarray(keys, dtype=np.uint64)
    reps = np.arange(n_rep, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64_np(keys[:, None] + (reps[None, :] + np.uint64(1)) * _M2).ravel()
