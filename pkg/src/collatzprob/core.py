"""Exact Collatz dynamics: stopping times, 2-adic valuations, odd-block traces."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _accel
from ._kernels import blocks as _blocks
from ._kernels import tau as _tau

U64_MAX = (1 << 64) - 1
DEFAULT_MAX_STEPS = 1_000_000

MAGIC = b"CTAU"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQBQ")


class NonConvergence(RuntimeError):
    """A trajectory did not reach 1 within the step budget."""

    def __init__(self, n: int, max_steps: int):
        super().__init__(f"n={n} did not reach 1 within {max_steps} steps")
        self.n = n
        self.max_steps = max_steps


class TableFormatError(ValueError):
    pass


def _checked_step(x: int) -> int:
    if x & 1:
        y = 3 * x + 1
        if y > U64_MAX:
            raise OverflowError(f"3*{x}+1 exceeds 64 bits")
        return y
    return x >> 1


def tau_direct(n: int, max_steps: int = DEFAULT_MAX_STEPS) -> int:
    """Count Collatz steps from ``n`` to 1 by plain iteration."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x, t = int(n), 0
    while x != 1:
        if t >= max_steps:
            raise NonConvergence(n, max_steps)
        x = _checked_step(x)
        t += 1
    return t


def v2(n: int) -> int:
    """2-adic valuation of a positive integer."""
    if n < 1:
        raise ValueError("v2 is defined for n >= 1")
    n = int(n)
    return (n & -n).bit_length() - 1


@dataclass(frozen=True)
class Trajectory:
    start_n: int
    states: list[int]

    @property
    def tau(self) -> int:
        return len(self.states) - 1


def trajectory(n: int, max_steps: int = DEFAULT_MAX_STEPS) -> Trajectory:
    if n < 1:
        raise ValueError("n must be >= 1")
    states = [int(n)]
    while states[-1] != 1:
        if len(states) > max_steps:
            raise NonConvergence(n, max_steps)
        states.append(_checked_step(states[-1]))
    return Trajectory(int(n), states)


@dataclass(frozen=True)
class OddBlockTrace:
    start_n: int
    initial_halvings: int
    odd_sequence: list[int] = field(default_factory=list)
    block_lengths: list[int] = field(default_factory=list)
    terminal: int = 1

    @property
    def tau(self) -> int:
        return self.initial_halvings + sum(1 + k for k in self.block_lengths)


def odd_block_trace(n: int, max_blocks: int = DEFAULT_MAX_STEPS) -> OddBlockTrace:
    """Accelerated odd-to-odd orbit of ``n``: m -> (3m+1) / 2**v2(3m+1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    n = int(n)
    h = v2(n)
    m = n >> h
    odds: list[int] = []
    ks: list[int] = []
    while m != 1:
        if len(odds) >= max_blocks:
            raise NonConvergence(n, max_blocks)
        t = 3 * m + 1
        if t > U64_MAX:
            raise OverflowError(f"3*{m}+1 exceeds 64 bits")
        k = v2(t)
        odds.append(m)
        ks.append(k)
        m = t >> k
    return OddBlockTrace(n, h, odds, ks, m)


@dataclass(frozen=True, eq=False)
class TauTable:
    """Dense stopping-time table; ``values[n] == tau(n)`` for 1 <= n <= n_max.

    ``values[0]`` is padding so the array can be indexed by ``n`` directly.
    """

    n_max: int
    values: np.ndarray
    checksum: int

    @property
    def width(self) -> int:
        return self.values.dtype.itemsize

    def __getitem__(self, n):
        return self.values[n]

    def __len__(self) -> int:
        return self.n_max

    def payload(self) -> bytes:
        return self.values[1:].astype(f"<u{self.width}", copy=False).tobytes()


def table_checksum(values: np.ndarray) -> int:
    """64-bit blake2b digest of the little-endian payload (index 1 first)."""
    width = values.dtype.itemsize
    h = hashlib.blake2b(digest_size=8)
    h.update(bytes([width]))
    h.update(np.ascontiguousarray(values[1:]).astype(f"<u{width}", copy=False).data)
    return int.from_bytes(h.digest(), "little")


def _raise_for(code: int, n_max: int) -> None:
    if code == -1:
        raise OverflowError(f"3x+1 overflowed int64 while filling n <= {n_max}")
    if code == -3:
        raise NonConvergence(n_max, _tau.STEP_GUARD)
    if code != 0:
        raise RuntimeError(f"tau kernel failed with code {code}")


def build_tau_table(n_max: int, parallel: bool = False, n_chunks: int = 64) -> TauTable:
    """Fill tau(1..n_max) with the memoized shortcut tau(i) = k + tau(m), m < i.

    Values are stored as uint16 and widened to uint32 only if some
    stopping time does not fit.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    for dtype in (np.uint16, np.uint32):
        out = np.zeros(n_max + 1, dtype=dtype)
        vmax = int(np.iinfo(dtype).max)
        if not _accel.JIT_ENABLED:
            code = _tau.fill_numpy(out, vmax)
        elif parallel:
            code = _tau.fill_parallel(out, vmax, _tau.STEP_GUARD, n_chunks)
        else:
            code = _tau.fill_sequential(out, vmax, _tau.STEP_GUARD)
        if code != -2:
            break
    _raise_for(code, n_max)
    return TauTable(n_max, out, table_checksum(out))


def save_tau_table(table: TauTable, path) -> None:
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, table.n_max, table.width, table.checksum)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(table.payload())


def read_tau_header(path) -> dict:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
    if len(raw) != _HEADER.size:
        raise TableFormatError(f"{path}: truncated header")
    magic, version, n_max, width, checksum = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise TableFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise TableFormatError(f"{path}: unsupported version {version}")
    if width not in (1, 2, 4, 8):
        raise TableFormatError(f"{path}: bad value width {width}")
    return {"n_max": n_max, "width": width, "checksum": checksum}


def load_tau_table(path, verify: bool = True) -> TauTable:
    head = read_tau_header(path)
    n_max, width = head["n_max"], head["width"]
    payload = np.fromfile(path, dtype=f"<u{width}", offset=_HEADER.size)
    if payload.size != n_max:
        raise TableFormatError(f"{path}: expected {n_max} values, found {payload.size}")
    values = np.zeros(n_max + 1, dtype=f"u{width}")
    values[1:] = payload
    checksum = table_checksum(values)
    if verify and checksum != head["checksum"]:
        raise TableFormatError(f"{path}: checksum mismatch")
    return TauTable(n_max, values, checksum)


def export_csv(table: TauTable, path, chunk: int = 1 << 20) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("n,tau\n")
        for lo in range(1, table.n_max + 1, chunk):
            hi = min(table.n_max + 1, lo + chunk)
            block = np.column_stack([np.arange(lo, hi), table.values[lo:hi]])
            np.savetxt(fh, block, fmt="%d", delimiter=",")


def collect_block_lengths(n_max: int, k_cap: int = 30) -> np.ndarray:
    """8 x k_cap counts of min(v2(3m+1), k_cap) over odd m <= n_max, by m % 8.

    Column ``k - 1`` holds block length ``k``; the last column aggregates
    everything >= k_cap. Rows for even residues are always zero.
    """
    if k_cap < 1:
        raise ValueError("k_cap must be >= 1")
    if n_max < 1:
        return np.zeros((8, k_cap), dtype=np.int64)
    if _accel.JIT_ENABLED:
        return _blocks.count_jit(n_max, k_cap)
    return _blocks.count_numpy(n_max, k_cap)
