"""Numba kernels against their numpy fallbacks.

Each kernel runs once to compile, then best-of-``--repeat`` wall time is
reported for both paths, and the outputs are checked for equality.

    python3 benchmarks/bench_kernels.py [--n-max 1000000] [--repeat 3]
"""

import argparse
import math
import time

import numpy as np

from collatzprob import _accel
from collatzprob._kernels import blocks, gen, nb2, stats, tau
from collatzprob.features import Features
from collatzprob.nbmodel.sampler import _GlmTarget


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def tau_case(n_max):
    def run(fill):
        out = np.zeros(n_max + 1, dtype=np.uint16)
        assert fill(out) == 0
        return out

    return (
        lambda: run(lambda o: tau.fill_sequential(o, 65535, tau.STEP_GUARD)),
        lambda: run(lambda o: tau.fill_numpy(o, 65535)),
        np.array_equal,
    )


def blocks_case(n_max):
    return lambda: blocks.count_jit(n_max, 30), lambda: blocks.count_numpy(n_max, 30), np.array_equal


def moments_case(n_max):
    v = np.random.default_rng(0).integers(0, 700, n_max).astype(np.uint16)
    return lambda: stats.moments_jit(v), lambda: stats.moments_numpy(v), lambda a, b: tuple(a) == tuple(b)


def likelihood_case(n_max, dirty=8):
    r = np.random.default_rng(1)
    m = min(n_max, 50_000)
    t = _GlmTarget(Features.from_arrays(r.integers(1, 10**7, m), r.integers(0, 600, m)))
    eta0 = r.normal(2, 0.3, 8)

    def run(kernel):
        # NaN marks the classes to recompute; a sampler move on one offset dirties one class
        out = np.zeros(8)
        out[8 - dirty :] = np.nan
        kernel(t.y, t.logn, t.bounds, eta0, 0.3, math.log(0.16), out)
        return out

    return (
        lambda: run(nb2.class_terms_jit),
        lambda: run(nb2.class_terms_numpy),
        lambda a, b: np.allclose(a, b, rtol=1e-12, atol=0),
    )


def predictive_case(n_max):
    r = np.random.default_rng(2)
    m, s = min(n_max, 20_000), 200
    y = r.integers(0, 600, m)
    logn = np.log(r.integers(1, 10**7, m).astype(np.float64))
    res = r.integers(0, 8, m)
    args = (r.normal(1.5, 0.1, s), r.normal(0.3, 0.01, s), r.normal(0, 0.2, (s, 8)), np.log(r.uniform(0.1, 0.2, s)))

    def run(kernel):
        out = np.empty(m)
        kernel(y, logn, res, *args, out)
        return out

    return (
        lambda: run(nb2.predictive_jit),
        lambda: run(nb2.predictive_numpy),
        lambda a, b: np.allclose(a, b, rtol=1e-12, atol=0),
    )


def simulate_case(n_max):
    r = np.random.default_rng(3)
    m = min(n_max, 20_000)
    ns = r.integers(1, 10**7, m).astype(np.int64)
    states = r.integers(0, 2**64, m, dtype=np.uint64)
    cdf = np.cumsum(0.5 ** np.arange(1, 31))[None, None, :].repeat(8, axis=1)
    cdf[..., -1] = 1.0
    table = np.zeros(m, dtype=np.int64)

    def run(kernel):
        t, st = np.empty(m, np.int64), np.empty(m, np.int64)
        kernel(ns, states, cdf, table, np.int64(200_000), t, st)
        return t, st

    return (
        lambda: run(gen.simulate_jit),
        lambda: run(gen.simulate_numpy),
        lambda a, b: np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1]),
    )


CASES = {
    "tau table": tau_case,
    "block counts": blocks_case,
    "moments": moments_case,
    "nb2 all classes": likelihood_case,
    "nb2 one class": lambda n_max: likelihood_case(n_max, dirty=1),
    "predictive lme": predictive_case,
    "generator": simulate_case,
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-max", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--only", choices=sorted(CASES), action="append")
    args = ap.parse_args(argv)
    if not _accel.JIT_ENABLED:
        ap.error("numba is disabled; unset COLLATZPROB_DISABLE_JIT to compare backends")

    print(f"{'kernel':<16}{'numba s':>10}{'numpy s':>10}{'speedup':>9}  equal")
    ok = True
    for name in args.only or CASES:
        jit, fallback, same = CASES[name](args.n_max)
        jit()
        tj, a = best_of(jit, args.repeat)
        tn, b = best_of(fallback, args.repeat)
        eq = bool(same(a, b))
        ok &= eq
        print(f"{name:<16}{tj:>10.4f}{tn:>10.4f}{tn / tj:>8.1f}x  {eq}")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
