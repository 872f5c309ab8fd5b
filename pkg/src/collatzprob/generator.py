"""Odd-block generative models G1 (geometric), G2 (global) and G3 (mod-8).

Block lengths live on the capped support {1..k_max}; the last cell holds the
whole tail K >= k_max. Calibrated models keep their Dirichlet posterior
concentrations and sample from the posterior mean unless a per-trajectory
posterior draw is requested.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from ._kernels import gen as _gen
from ._kernels.rng import replicate_states, stream_keys
from .core import odd_block_trace, v2

VARIANTS = ("geometric", "global", "conditional8")
ODD_RESIDUES = (1, 3, 5, 7)
LOG2_3 = math.log2(3.0)


class NonAbsorbed(RuntimeError):
    """Stochastic trajectory exceeded its step budget before reaching 1."""

    def __init__(self, n: int, steps: int):
        super().__init__(f"trajectory from n={n} not absorbed after {steps} steps")
        self.n = n
        self.steps = steps


def dirichlet_update(prior, counts) -> np.ndarray:
    prior = np.asarray(prior, dtype=np.float64)
    counts = np.asarray(counts)
    if prior.shape != counts.shape:
        raise ValueError(f"prior shape {prior.shape} does not match counts shape {counts.shape}")
    if np.any(prior <= 0):
        raise ValueError("prior concentrations must be positive")
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    return prior + counts


def dirichlet_mean(conc) -> np.ndarray:
    conc = np.asarray(conc, dtype=np.float64)
    return conc / conc.sum(axis=-1, keepdims=True)


def dirichlet_var(conc) -> np.ndarray:
    conc = np.asarray(conc, dtype=np.float64)
    a0 = conc.sum(axis=-1, keepdims=True)
    return conc * (a0 - conc) / (a0**2 * (a0 + 1.0))


def geometric_pmf(k_max: int) -> np.ndarray:
    """2**-k on 1..k_max with the tail mass 2**-k_max folded into the last cell."""
    pmf = 0.5 ** np.arange(1, k_max + 1, dtype=np.float64)
    pmf[-1] *= 2.0
    return pmf


@dataclass(frozen=True, eq=False)
class BlockLengthModel:
    k_max: int
    variant: str
    concentrations: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.variant == "geometric":
            return
        conc = np.asarray(self.concentrations, dtype=np.float64)
        want = (self.k_max,) if self.variant == "global" else (8, self.k_max)
        if conc.shape != want:
            raise ValueError(f"{self.variant} concentrations must have shape {want}")
        rows = conc if conc.ndim == 2 else conc[None]
        odd_rows = rows[list(ODD_RESIDUES)] if self.variant == "conditional8" else rows
        if np.any(odd_rows <= 0):
            raise ValueError("concentrations must be positive")
        object.__setattr__(self, "concentrations", conc)

    def pmf(self, residue8: int | None = None) -> np.ndarray:
        """Posterior-mean pmf; for conditional8, pass an odd residue or get the pooled row."""
        if self.variant == "geometric":
            return geometric_pmf(self.k_max)
        if self.variant == "global":
            return dirichlet_mean(self.concentrations)
        if residue8 is None:
            return dirichlet_mean(self.concentrations[list(ODD_RESIDUES)].sum(axis=0))
        _check_residue(residue8)
        return dirichlet_mean(self.concentrations[residue8])

    def posterior_sd(self, residue8: int | None = None) -> np.ndarray:
        if self.variant == "geometric":
            return np.zeros(self.k_max)
        if self.variant == "global":
            return np.sqrt(dirichlet_var(self.concentrations))
        if residue8 is None:
            return np.sqrt(dirichlet_var(self.concentrations[list(ODD_RESIDUES)].sum(axis=0)))
        _check_residue(residue8)
        return np.sqrt(dirichlet_var(self.concentrations[residue8]))

    def pmf_table(self) -> np.ndarray:
        """(8, k_max) pmf per residue; even rows (never visited) hold the pooled pmf."""
        if self.variant != "conditional8":
            return np.tile(self.pmf(), (8, 1))
        table = np.tile(self.pmf(None), (8, 1))
        for r in ODD_RESIDUES:
            table[r] = self.pmf(r)
        return table

    def draw_pmf_table(self, rng: np.random.Generator) -> np.ndarray:
        """One Dirichlet posterior draw laid out like ``pmf_table``."""
        if self.variant == "geometric":
            return self.pmf_table()
        if self.variant == "global":
            return np.tile(rng.dirichlet(self.concentrations), (8, 1))
        table = np.tile(self.pmf(None), (8, 1))
        for r in ODD_RESIDUES:
            table[r] = rng.dirichlet(self.concentrations[r])
        return table

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "k_max": self.k_max,
            "concentrations": None if self.concentrations is None else self.concentrations.tolist(),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BlockLengthModel":
        conc = d.get("concentrations")
        return cls(
            int(d["k_max"]),
            d["variant"],
            None if conc is None else np.asarray(conc, dtype=np.float64),
            d.get("provenance", {}),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "BlockLengthModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _check_residue(residue8: int) -> None:
    if residue8 not in ODD_RESIDUES:
        raise ValueError(f"conditional8 is defined for odd residues only, got {residue8}")


def calibrate(counts, variant: str, prior: float = 1.0, provenance: dict | None = None) -> BlockLengthModel:
    """Dirichlet-multinomial calibration from an 8 x k_max count matrix."""
    counts = np.asarray(counts)
    if counts.ndim != 2 or counts.shape[0] != 8:
        raise ValueError("counts must be an 8 x k_max matrix")
    if np.any(counts < 0):
        raise ValueError("counts must be nonnegative")
    k_max = counts.shape[1]
    prov = dict(provenance or {})
    if variant == "geometric":
        return BlockLengthModel(k_max, "geometric", None, prov)
    if variant == "global":
        conc = dirichlet_update(np.full(k_max, prior), counts.sum(axis=0))
        return BlockLengthModel(k_max, "global", conc, prov)
    if variant == "conditional8":
        conc = np.zeros((8, k_max))
        for r in ODD_RESIDUES:
            conc[r] = dirichlet_update(np.full(k_max, prior), counts[r])
        return BlockLengthModel(k_max, "conditional8", conc, prov)
    raise ValueError(f"unknown variant {variant!r}")


@dataclass(frozen=True)
class GenConfig:
    max_steps: int = 200_000
    seed: int = 0
    pk_source: str = "posterior_mean"

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.pk_source not in ("posterior_mean", "posterior_draw"):
            raise ValueError(f"unknown pk_source {self.pk_source!r}")


def round_odd(x: float) -> int:
    """Nearest integer (ties to even), clamped to 1 and bumped up to odd."""
    if not math.isfinite(x):
        raise ValueError(f"round_odd needs a finite value, got {x}")
    r = round(x)
    if r <= 1:
        return 1
    return r if r & 1 else r + 1


def _cdf(pmf_table) -> np.ndarray:
    cdf = np.cumsum(pmf_table, axis=-1)
    cdf[..., -1] = 1.0
    return cdf


def sample_k(model: BlockLengthModel, residue8: int, rng: np.random.Generator, pmf_table=None, size=None):
    """Block length in 1..k_max for an odd state with the given residue mod 8.

    With ``size`` an int64 array of independent draws is returned instead.
    """
    if model.variant == "conditional8":
        _check_residue(residue8)
    table = model.pmf_table() if pmf_table is None else pmf_table
    u = rng.random(size)
    k = np.minimum(np.searchsorted(_cdf(table[residue8 & 7]), u, side="right") + 1, model.k_max)
    return int(k) if size is None else k.astype(np.int64)


def _run(ns, states, cdf, table, max_steps):
    tau = np.empty(ns.size, dtype=np.int64)
    steps = np.empty(ns.size, dtype=np.int64)
    kernel = _gen.simulate_jit if _accel.JIT_ENABLED else _gen.simulate_numpy
    kernel(ns, states, np.ascontiguousarray(cdf), table, np.int64(max_steps), tau, steps)
    return tau, steps


def simulate_tau(n: int, model: BlockLengthModel, config: GenConfig, rng: np.random.Generator) -> int:
    """One generated stopping time; raises ``NonAbsorbed`` past the step budget."""
    if n < 1:
        raise ValueError("n must be >= 1")
    table = model.draw_pmf_table(rng) if config.pk_source == "posterior_draw" else model.pmf_table()
    state = rng.integers(0, 2**64, dtype=np.uint64, endpoint=False)
    tau, steps = _run(
        np.array([n], dtype=np.int64),
        np.array([state], dtype=np.uint64),
        _cdf(table)[None],
        np.zeros(1, dtype=np.int64),
        config.max_steps,
    )
    if tau[0] < 0:
        raise NonAbsorbed(int(n), int(steps[0]))
    return int(tau[0])


def simulate_batch(
    ns,
    model: BlockLengthModel,
    n_rep: int,
    config: GenConfig,
    point_index=None,
    chunk: int = 4096,
) -> np.ndarray:
    """(len(ns), n_rep) generated stopping times, -1 marking non-absorbed runs.

    Replicates of point ``i`` use a substream keyed by ``(config.seed,
    point_index[i])``, so results do not depend on batching or order.
    """
    ns = np.atleast_1d(np.asarray(ns, dtype=np.int64))
    if np.any(ns < 1):
        raise ValueError("all n must be >= 1")
    idx = np.arange(ns.size) if point_index is None else np.asarray(point_index)
    keys = stream_keys(config.seed, idx)
    out = np.empty((ns.size, n_rep), dtype=np.int64)
    if config.pk_source == "posterior_mean":
        cdf = _cdf(model.pmf_table())[None]
        tau, _ = _run(
            np.repeat(ns, n_rep),
            replicate_states(keys, n_rep),
            cdf,
            np.zeros(ns.size * n_rep, dtype=np.int64),
            config.max_steps,
        )
        return tau.reshape(ns.size, n_rep)
    for lo in range(0, ns.size, max(1, chunk // n_rep)):
        hi = min(ns.size, lo + max(1, chunk // n_rep))
        tables = []
        for i in range(lo, hi):
            g = np.random.Generator(np.random.PCG64(np.random.SeedSequence([config.seed, int(idx[i])])))
            tables.extend(model.draw_pmf_table(g) for _ in range(n_rep))
        tau, _ = _run(
            np.repeat(ns[lo:hi], n_rep),
            replicate_states(keys[lo:hi], n_rep),
            _cdf(np.stack(tables)),
            np.arange(len(tables), dtype=np.int64),
            config.max_steps,
        )
        out[lo:hi] = tau.reshape(hi - lo, n_rep)
    return out


def log_drift(model: BlockLengthModel, residue8: int | None = None) -> float:
    """Expected log2 change per odd block, log2(3) - E[K].

    The geometric reference uses its uncapped mean E[K] = 2.
    """
    if model.variant == "geometric":
        return LOG2_3 - 2.0
    pmf = model.pmf(residue8)
    return LOG2_3 - float(np.dot(np.arange(1, model.k_max + 1), pmf))


@dataclass(frozen=True)
class TracePair:
    n: int
    deterministic: list[float]
    stochastic: list[float]
    absorbed: bool


def stochastic_odd_states(n: int, model: BlockLengthModel, config: GenConfig, rng: np.random.Generator):
    """Odd states M_0, M_1, ... of one generated trajectory (before reaching 1)."""
    table = model.draw_pmf_table(rng) if config.pk_source == "posterior_draw" else model.pmf_table()
    update = _accel.pick(_gen.odd_update)
    total = v2(n)
    m = n >> total
    states = []
    while m != 1:
        if total > config.max_steps or m > _gen.ESCAPE_LIMIT:
            return states, False
        states.append(m)
        k = sample_k(model, m & 7, rng, table)
        total += 1 + k
        m = int(update(np.int64(m), np.int64(k)))
    return states, True


def trace_compare(n: int, model: BlockLengthModel, config: GenConfig, rng: np.random.Generator) -> TracePair:
    """log2 of the odd states along the exact and the generated trajectory."""
    det = odd_block_trace(n).odd_sequence
    sto, absorbed = stochastic_odd_states(n, model, config, rng)
    return TracePair(int(n), [math.log2(m) for m in det], [math.log2(m) for m in sto], absorbed)
