"""Outputs of every kernel-backed entry point, for comparing the two backends.

Run as a script it prints the fingerprint as JSON, so a subprocess started
with COLLATZPROB_DISABLE_JIT=1 can be compared against the JIT run.
"""

import hashlib
import json

import numpy as np

from collatzprob import _accel, build_tau_table, collect_block_lengths
from collatzprob.features import make_features, make_split
from collatzprob.generator import BlockLengthModel, GenConfig, calibrate, simulate_batch
from collatzprob.nbmodel import NbPosterior, predictive_log_densities
from collatzprob.scoring import summarize


def _digest(a) -> str:
    return hashlib.sha256(np.ascontiguousarray(a).tobytes()).hexdigest()


def fingerprint() -> dict:
    table = build_tau_table(200_000)
    split = make_split(7, 200_000, 3000, 3000)
    counts = collect_block_lengths(200_000, 30)
    g3 = calibrate(counts, "conditional8")
    test = make_features(table, split.test_indices)
    sims = simulate_batch(test.n[:500], g3, 8, GenConfig(seed=3))
    draws = simulate_batch(test.n[:200], g3, 3, GenConfig(seed=3, pk_source="posterior_draw"))
    geo = simulate_batch(np.arange(1, 3001), BlockLengthModel(30, "geometric"), 2, GenConfig(seed=1))
    rng = np.random.default_rng(0)
    s = 40
    post = NbPosterior(
        beta0=rng.normal(1.5, 0.1, s),
        beta_log=rng.normal(0.3, 0.01, s),
        z=rng.normal(0, 1, (s, 8)),
        sigma_u=np.full(s, 0.1),
        alpha=np.abs(rng.normal(0.15, 0.02, s)),
    )
    lp = predictive_log_densities(post, test.n, test.tau)
    stats = summarize(table)
    return {
        "backend": _accel.backend(),
        "checksum": table.checksum,
        "split": _digest(np.concatenate([split.fit_indices, split.test_indices]).astype(np.int64)),
        "counts": counts.tolist(),
        "sims": _digest(sims),
        "draws": _digest(draws),
        "geo": _digest(geo),
        "lp": lp.tolist(),
        "stats": [stats.count, stats.min, stats.max, stats.mean, stats.variance],
    }


if __name__ == "__main__":
    print(json.dumps(fingerprint()))
