"""Regression covariates and the reproducible train/test split.

The split stream is numpy's PCG64 seeded through ``SeedSequence(seed)``.
Draws are a partial Fisher-Yates shuffle over 1..n_total: the first
``n_fit`` swaps give the fit set, the next ``n_test`` swaps (same stream,
remaining pool) give the test set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from . import _accel
from ._kernels.shuffle import partial_fisher_yates
from .core import TauTable


class FeatureRow(NamedTuple):
    n: int
    log_n: float
    residue8: int
    tau: int


@dataclass(frozen=True, eq=False)
class Features:
    """Column-oriented feature rows (natural-log covariate)."""

    n: np.ndarray
    log_n: np.ndarray
    residue8: np.ndarray
    tau: np.ndarray

    def __len__(self) -> int:
        return self.n.size

    def __iter__(self) -> Iterator[FeatureRow]:
        for i in range(len(self)):
            yield self.row(i)

    def row(self, i: int) -> FeatureRow:
        return FeatureRow(int(self.n[i]), float(self.log_n[i]), int(self.residue8[i]), int(self.tau[i]))

    def take(self, idx) -> "Features":
        return Features(self.n[idx], self.log_n[idx], self.residue8[idx], self.tau[idx])

    @classmethod
    def from_arrays(cls, n, tau) -> "Features":
        n = np.asarray(n, dtype=np.int64)
        return cls(n, np.log(n.astype(np.float64)), (n & 7).astype(np.int64), np.asarray(tau, dtype=np.int64))


def make_features(table: TauTable, indices) -> Features:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 1 or idx.max() > table.n_max):
        raise IndexError(f"indices must lie in [1, {table.n_max}]")
    return Features.from_arrays(idx, table.values[idx])


@dataclass(frozen=True, eq=False)
class SplitSpec:
    seed: int
    n_total: int
    n_fit: int
    n_test: int
    fit_indices: np.ndarray
    test_indices: np.ndarray

    def __eq__(self, other) -> bool:
        if not isinstance(other, SplitSpec):
            return NotImplemented
        return (
            (self.seed, self.n_total, self.n_fit, self.n_test)
            == (other.seed, other.n_total, other.n_fit, other.n_test)
            and np.array_equal(self.fit_indices, other.fit_indices)
            and np.array_equal(self.test_indices, other.test_indices)
        )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_total": self.n_total,
            "n_fit": self.n_fit,
            "n_test": self.n_test,
            "fit_indices": self.fit_indices.tolist(),
            "test_indices": self.test_indices.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitSpec":
        return cls(
            int(d["seed"]),
            int(d["n_total"]),
            int(d["n_fit"]),
            int(d["n_test"]),
            np.asarray(d["fit_indices"], dtype=np.int64),
            np.asarray(d["test_indices"], dtype=np.int64),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "SplitSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def make_split(seed: int, n_total: int, n_fit: int, n_test: int) -> SplitSpec:
    if n_fit < 1 or n_test < 1:
        raise ValueError("n_fit and n_test must be positive")
    if n_fit + n_test > n_total:
        raise ValueError(f"cannot draw {n_fit}+{n_test} indices from {n_total}")
    k = n_fit + n_test
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    # targets[i] uniform on [i, n_total)
    targets = rng.integers(np.arange(k, dtype=np.int64), n_total, dtype=np.int64)
    dtype = np.int32 if n_total < 2**31 else np.int64
    perm = np.arange(1, n_total + 1, dtype=dtype)
    drawn = _accel.pick(partial_fisher_yates)(perm, targets).astype(np.int64)
    return SplitSpec(seed, n_total, n_fit, n_test, drawn[:n_fit], drawn[n_fit:])
