import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collatzprob import build_tau_table
from collatzprob.features import Features, make_features
from collatzprob.generator import BlockLengthModel, GenConfig
from collatzprob.nbmodel import GlmParams, Nb2Params, NbPosterior, nb2_log_pmf, predictive_log_densities
from collatzprob.scoring import (
    EPSILON,
    EvalReport,
    compare,
    format_table,
    gen_log_score,
    glm_log_score,
    hit_log_score,
    summarize,
    wasserstein1,
    write_table1,
    write_table2,
)
from oracles import collatz_steps, odd_states

# scipy.stats.wasserstein_distance on the samples built below, frozen
W1_INT = 6.7766445690974
W1_NORMAL = 0.8063993615189684
W1_SMALL = 3.6666666666666665


def _two_pass(values):
    n = len(values)
    mean = math.fsum(values) / n
    ss = math.fsum((v - mean) ** 2 for v in values)
    return mean, ss / n, ss / (n - 1)


def test_summarize_two_values():
    s = summarize(np.array([0, 1]))
    assert s.mean == 0.5 and s.max == 1 and s.min == 0 and s.count == 2
    assert s.variance == 0.25 and s.variance_sample == 0.5


@pytest.mark.parametrize("n_max", [100, 100_000])
def test_summarize_matches_two_pass(n_max):
    table = build_tau_table(n_max)
    s = summarize(table)
    values = [collatz_steps(n) for n in range(1, n_max + 1)] if n_max <= 100 else table.values[1:].tolist()
    mean, var_pop, var_samp = _two_pass(values)
    assert s.count == n_max
    assert s.mean == pytest.approx(mean, rel=1e-12)
    assert s.variance == pytest.approx(var_pop, rel=1e-12)
    assert s.variance_sample == pytest.approx(var_samp, rel=1e-12)
    assert s.dispersion_ratio == pytest.approx(var_pop / mean, rel=1e-12)
    assert s.min == min(values) and s.max == max(values)
    assert s.variance_convention == "population"


def test_summarize_rejects_bad_input():
    with pytest.raises(ValueError):
        summarize(np.array([], dtype=np.int64))
    with pytest.raises(TypeError):
        summarize(np.array([0.5, 1.0]))


def test_table1_csv(tmp_path):
    path = tmp_path / "t1.csv"
    write_table1(summarize(np.array([0, 1, 2, 7])), path)
    text = path.read_text().splitlines()
    assert text[0] == "statistic,value"
    assert "mean,2.500" in text and "tau_max,7" in text


def test_w1_examples():
    assert wasserstein1([1, 2, 3], [3, 1, 2]) == 0.0
    assert wasserstein1([0], [3]) == 3.0
    assert wasserstein1([0, 1], [1, 2]) == 1.0
    assert wasserstein1([0, 1, 3], [5]) == pytest.approx(W1_SMALL, abs=1e-14)


def test_w1_matches_scipy_values():
    a = np.random.default_rng(1).integers(0, 50, 37)
    b = np.random.default_rng(2).integers(0, 60, 53)
    c = np.random.default_rng(3).normal(0, 1, 100)
    d = np.random.default_rng(4).normal(0.5, 2, 64)
    assert wasserstein1(a, b) == pytest.approx(W1_INT, rel=1e-12)
    assert wasserstein1(c, d) == pytest.approx(W1_NORMAL, rel=1e-12)


def test_w1_equal_sizes_agree_with_cdf_form():
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=40), rng.normal(1, 2, size=40)
    # doubling one sample keeps the distribution but forces the unequal-size path
    assert wasserstein1(a, b) == pytest.approx(wasserstein1(a, np.concatenate([b, b[:20], b[20:]])), rel=1e-12)


def test_w1_empty_rejected():
    with pytest.raises(ValueError):
        wasserstein1([], [1.0])


samples = st.lists(st.integers(-1000, 1000), min_size=1, max_size=30)


@settings(max_examples=200)
@given(samples, samples, samples)
def test_w1_metric_properties(a, b, c):
    ab, ba = wasserstein1(a, b), wasserstein1(b, a)
    assert ab == pytest.approx(ba, rel=1e-12, abs=1e-12)
    assert ab >= 0
    assert wasserstein1(a, c) <= ab + wasserstein1(b, c) + 1e-9
    same = sorted(a) == sorted(b)
    assert (ab == 0) == same or len(a) != len(b)


@given(samples, samples, st.integers(-10**6, 10**6))
def test_w1_translation(a, b, shift):
    assert wasserstein1(np.add(a, shift), np.add(b, shift)) == wasserstein1(a, b)


def test_w1_zero_for_resampled_distribution():
    assert wasserstein1([1, 2], [1, 1, 2, 2]) == 0.0
    assert wasserstein1([1, 2], [1, 2, 2]) > 0


def _posterior(draws):
    return NbPosterior.from_params(draws)


def _glm_draw(beta0=2.0, beta_log=0.3, alpha=0.2):
    return GlmParams(beta0, beta_log, tuple(np.linspace(-0.2, 0.2, 8)), 0.3, alpha)


def test_glm_single_row_single_draw():
    p = _glm_draw()
    test = Features.from_arrays([10], [6])
    rep = glm_log_score(_posterior([p]), test)
    mu = float(p.mu(np.array([10]))[0])
    assert rep.log_score == pytest.approx(nb2_log_pmf(6, Nb2Params(mu, p.alpha)), abs=1e-12)
    assert rep.n_test == 1 and rep.per_obs_log_score == rep.log_score


def test_glm_duplicated_test_set_doubles(table_1e5):
    post = _posterior([_glm_draw(), _glm_draw(2.2, 0.28, 0.15)])
    test = make_features(table_1e5, np.arange(1, 5001))
    double = make_features(table_1e5, np.concatenate([np.arange(1, 5001)] * 2))
    assert glm_log_score(post, double).log_score == 2 * glm_log_score(post, test).log_score


def test_glm_additivity(table_1e5):
    post = _posterior([_glm_draw(), _glm_draw(2.2, 0.28, 0.15)])
    idx = np.random.default_rng(6).permutation(np.arange(1, 3001))
    a, b = idx[:1200], idx[1200:]
    whole = glm_log_score(post, make_features(table_1e5, idx))
    terms = np.concatenate([
        predictive_log_densities(post, a, table_1e5.values[a]),
        predictive_log_densities(post, b, table_1e5.values[b]),
    ])
    # pointwise terms do not depend on batching, so the total is their exact sum
    np.testing.assert_array_equal(terms, predictive_log_densities(post, idx, table_1e5.values[idx]))
    assert whole.log_score == math.fsum(terms)
    parts = glm_log_score(post, make_features(table_1e5, a)).log_score + glm_log_score(
        post, make_features(table_1e5, b)
    ).log_score
    assert whole.log_score == pytest.approx(parts, rel=1e-15, abs=1e-9)


def test_glm_score_empty_rejected():
    with pytest.raises(ValueError):
        glm_log_score(_posterior([_glm_draw()]), Features.from_arrays([], []))


def _reproducing_model():
    conc = np.full((8, 8), 1e-300)
    for r, k in ((1, 2), (3, 1), (5, 4), (7, 1)):
        conc[r, k - 1] = 1e20
    return BlockLengthModel(8, "conditional8", conc)


def test_gen_score_reproducing_model():
    ns = [n for n in range(2, 5000) if all(k == 4 for m, k in zip(*odd_states(n)[1:]) if m % 8 == 5)]
    test = Features.from_arrays(ns, [collatz_steps(n) for n in ns])
    rep = gen_log_score(_reproducing_model(), test, s_mc=5)
    assert rep.log_score == math.fsum([math.log(1.0 + EPSILON)] * len(ns))
    assert rep.w1 == 0.0 and rep.extra["zero_hit_points"] == 0


def test_gen_score_zero_hits():
    test = Features.from_arrays([3, 5, 7, 9], [0, 0, 0, 0])
    rep = gen_log_score(BlockLengthModel(30, "geometric"), test, s_mc=8, epsilon=1e-12)
    assert rep.log_score == 4 * math.log(1e-12)
    assert rep.extra["zero_hit_points"] == 4


def test_gen_score_non_absorbed_never_hits():
    conc = np.full((8, 4), 1e-300)
    conc[[1, 3, 5, 7], 0] = 1e20
    expand = BlockLengthModel(4, "conditional8", conc)
    test = Features.from_arrays([3, 7], [-1, -1])
    rep = gen_log_score(expand, test, s_mc=3, config=GenConfig(max_steps=2000))
    assert rep.log_score == 2 * math.log(EPSILON)
    assert rep.extra["non_absorbed"] == 6
    assert rep.w1 == math.inf


def test_gen_score_epsilon_monotone():
    hits = np.array([0, 0, 3, 40])
    scores = [hit_log_score(hits, 40, eps) for eps in (1e-15, 1e-12, 1e-9, 1e-6)]
    assert all(x < y for x, y in zip(scores, scores[1:]))
    test = Features.from_arrays([27, 97], [0, 0])
    m = BlockLengthModel(30, "geometric")
    a = gen_log_score(m, test, s_mc=4, epsilon=1e-12).log_score
    b = gen_log_score(m, test, s_mc=4, epsilon=1e-6).log_score
    assert b > a


def test_gen_score_matches_manual_hits(table_1e5):
    m = BlockLengthModel(30, "geometric")
    idx = np.arange(1, 401)
    test = make_features(table_1e5, idx)
    cfg = GenConfig(seed=3)
    rep = gen_log_score(m, test, s_mc=10, config=cfg)
    from collatzprob.generator import simulate_batch

    sims = simulate_batch(idx, m, 10, cfg)
    hits = (sims == table_1e5.values[idx][:, None]).sum(axis=1)
    expect = math.fsum(math.log(h / 10 + EPSILON) for h in hits.tolist())
    assert rep.log_score == expect
    assert rep.s_mc == 10 and rep.seed == 3 and rep.n_test == 400


@pytest.mark.parametrize("kw", [{"s_mc": 0}, {"epsilon": 0.0}])
def test_gen_score_validation(kw):
    with pytest.raises(ValueError):
        gen_log_score(BlockLengthModel(30, "geometric"), Features.from_arrays([3], [7]), **kw)


def _report(model_id, score, w1=1.0):
    return EvalReport(model_id, score, score / 50_000, w1, 50_000)


def test_compare_reference_order(tmp_path):
    reports = [
        _report("G2", -1_165_983.43, 17.594),
        _report("NB2-GLM", -272_911.95, 3.199),
        _report("G3", -1_079_086.65, 5.434),
    ]
    assert [r.model_id for r in compare(reports)] == ["NB2-GLM", "G3", "G2"]
    path = tmp_path / "t2.csv"
    write_table2(reports, path)
    lines = path.read_text().splitlines()
    assert lines == ["model,log_score,w1", "NB2-GLM,-272911.95,3.199", "G3,-1079086.65,5.434", "G2,-1165983.43,17.594"]
    assert format_table(reports).splitlines()[1].startswith("NB2-GLM")


def test_compare_single_and_ties():
    assert [r.model_id for r in compare([_report("x", -1.0)])] == ["x"]
    ranked = compare([_report("b", -5.0), _report("a", -5.0), _report("c", -1.0)])
    assert [r.model_id for r in ranked] == ["c", "a", "b"]
    with pytest.raises(ValueError):
        compare([])


def test_report_round_trip(tmp_path):
    rep = EvalReport("G3", -10.5, -0.105, 2.5, 100, 40, 1e-12, 7, {"non_absorbed": 0})
    rep.save(tmp_path / "r.json")
    assert EvalReport.load(tmp_path / "r.json") == rep


def test_summary_reproducible_random_subset():
    vals = [random.Random(0).randrange(700) for _ in range(1000)]
    s = summarize(np.array(vals))
    mean, var_pop, _ = _two_pass(vals)
    assert s.mean == pytest.approx(mean, rel=1e-15)
    assert s.variance == pytest.approx(var_pop, rel=1e-12)
