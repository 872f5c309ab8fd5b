"""Held-out comparison: summary statistics, log predictive scores and W1."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import _accel
from ._kernels import stats as _stats
from .core import TauTable
from .generator import BlockLengthModel, GenConfig, simulate_batch
from .nbmodel import NbPosterior, posterior_predictive, predictive_log_densities

EPSILON = 1e-12


@dataclass(frozen=True)
class SummaryStats:
    """Moments of tau; ``variance`` follows ``variance_convention``."""

    count: int
    min: int
    max: int
    mean: float
    variance: float
    variance_sample: float
    dispersion_ratio: float
    variance_convention: str = "population"

    def as_row(self) -> dict:
        return asdict(self)


def summarize(data) -> SummaryStats:
    """Single pass over the stopping times with exact integer accumulators.

    Both variance conventions are returned; the population (1/N) one is
    reported as ``variance``. They agree with Table-1 precision at N = 1e7.
    """
    values = data.values[1:] if isinstance(data, TauTable) else np.asarray(data)
    if values.size == 0:
        raise ValueError("cannot summarize an empty table")
    if values.dtype.kind not in "iu":
        raise TypeError("summarize expects integer data")
    moments = _stats.moments_jit if _accel.JIT_ENABLED else _stats.moments_numpy
    n, s, s2, lo, hi = (int(v) for v in moments(values))
    mean = Fraction(s, n)
    ss = Fraction(s2) - Fraction(s * s, n)
    var_pop = ss / n
    var_samp = ss / (n - 1) if n > 1 else Fraction(0)
    return SummaryStats(
        count=n,
        min=lo,
        max=hi,
        mean=float(mean),
        variance=float(var_pop),
        variance_sample=float(var_samp),
        dispersion_ratio=float(var_pop / mean) if mean else math.nan,
    )


def wasserstein1(sample_a, sample_b) -> float:
    """W1 between two empirical distributions (L1 distance of quantile functions)."""
    a = np.sort(np.asarray(sample_a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(sample_b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("wasserstein1 needs two nonempty samples")
    if a.size == b.size:
        return float(np.mean(np.abs(a - b)))
    grid = np.sort(np.concatenate([a, b]))
    widths = np.diff(grid)
    fa = np.searchsorted(a, grid[:-1], side="right") / a.size
    fb = np.searchsorted(b, grid[:-1], side="right") / b.size
    return float(np.sum(np.abs(fa - fb) * widths))


@dataclass(frozen=True)
class EvalReport:
    model_id: str
    log_score: float
    per_obs_log_score: float
    w1: float
    n_test: int
    s_mc: int | None = None
    epsilon: float | None = None
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(**d)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "EvalReport":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def glm_log_score(posterior: NbPosterior, test, seed: int = 0, model_id: str = "NB2-GLM") -> EvalReport:
    """Sum of posterior-averaged NB2 log densities over the test rows.

    W1 compares the test stopping times with one posterior predictive draw
    per test point.
    """
    if len(test) == 0:
        raise ValueError("test set is empty")
    lp = predictive_log_densities(posterior, test.n, test.tau)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    ppc = posterior_predictive(posterior, test.n, 1, rng)[:, 0]
    score = math.fsum(lp)
    return EvalReport(
        model_id=model_id,
        log_score=score,
        per_obs_log_score=score / len(test),
        w1=wasserstein1(ppc, test.tau),
        n_test=len(test),
        seed=seed,
        extra={"posterior_draws": posterior.size},
    )


def hit_log_score(hits, s_mc: int, epsilon: float = EPSILON) -> float:
    """sum_i log(hits_i / s_mc + epsilon), correctly rounded."""
    hits = np.asarray(hits, dtype=np.float64)
    return math.fsum(np.log(hits / s_mc + epsilon))


def gen_log_score(
    model: BlockLengthModel,
    test,
    s_mc: int = 40,
    epsilon: float = EPSILON,
    config: GenConfig | None = None,
    model_id: str | None = None,
) -> EvalReport:
    """Monte-Carlo log score: p_hat(y_i) = hits / s_mc over simulated replicates.

    Non-absorbed replicates never count as hits. W1 uses the first replicate
    of every test point (non-absorbed ones dropped).
    """
    if s_mc < 1:
        raise ValueError("s_mc must be >= 1")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    cfg = config or GenConfig()
    sims = simulate_batch(test.n, model, s_mc, cfg)
    hits = np.sum((sims == np.asarray(test.tau)[:, None]) & (sims >= 0), axis=1)
    score = hit_log_score(hits, s_mc, epsilon)
    first = sims[:, 0]
    absorbed = first >= 0
    w1 = wasserstein1(first[absorbed], test.tau) if absorbed.any() else math.inf
    return EvalReport(
        model_id=model_id or model.variant,
        log_score=score,
        per_obs_log_score=score / len(test),
        w1=w1,
        n_test=len(test),
        s_mc=s_mc,
        epsilon=epsilon,
        seed=cfg.seed,
        extra={
            "non_absorbed": int(np.sum(sims < 0)),
            "zero_hit_points": int(np.sum(hits == 0)),
            "max_steps": cfg.max_steps,
            "pk_source": cfg.pk_source,
        },
    )


def compare(reports: list[EvalReport]) -> list[EvalReport]:
    """Rank by log score (descending); ties fall back to model_id."""
    if not reports:
        raise ValueError("need at least one report")
    return sorted(reports, key=lambda r: (-r.log_score, r.model_id))


def write_table2(reports: list[EvalReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "log_score", "w1"])
        for r in compare(reports):
            w.writerow([r.model_id, f"{r.log_score:.2f}", f"{r.w1:.3f}"])


def format_table(reports: list[EvalReport]) -> str:
    rows = [("Model", "Log score", "W1")]
    rows += [(r.model_id, f"{r.log_score:,.2f}", f"{r.w1:.3f}") for r in compare(reports)]
    widths = [max(len(row[i]) for row in rows) for i in range(3)]
    lines = [f"{a:<{widths[0]}}  {b:>{widths[1]}}  {c:>{widths[2]}}" for a, b, c in rows]
    return "\n".join(lines)


def write_table1(stats: SummaryStats, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["statistic", "value"])
        w.writerow(["N", stats.count])
        w.writerow(["tau_min", stats.min])
        w.writerow(["tau_max", stats.max])
        w.writerow(["mean", f"{stats.mean:.3f}"])
        w.writerow(["variance", f"{stats.variance:.3f}"])
        w.writerow(["variance_sample", f"{stats.variance_sample:.3f}"])
        w.writerow(["dispersion_ratio", f"{stats.dispersion_ratio:.3f}"])
        w.writerow(["variance_convention", stats.variance_convention])
