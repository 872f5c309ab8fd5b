import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collatzprob.features import FeatureRow, SplitSpec, make_features, make_split
from oracles import collatz_steps


def test_feature_rows(table_1e5):
    f = make_features(table_1e5, [8, 1, 27])
    assert list(f) == [
        FeatureRow(8, math.log(8), 0, 3),
        FeatureRow(1, 0.0, 1, 0),
        FeatureRow(27, math.log(27), 3, collatz_steps(27)),
    ]
    assert f.log_n[0] == pytest.approx(2.0794, abs=1e-4)


def test_feature_out_of_range(table_1e5):
    with pytest.raises(IndexError):
        make_features(table_1e5, [0])
    with pytest.raises(IndexError):
        make_features(table_1e5, [table_1e5.n_max + 1])


def test_features_are_pure(table_1e5):
    a = make_features(table_1e5, [5, 99, 1000])
    b = make_features(table_1e5, [5, 99, 1000])
    assert a.log_n.tobytes() == b.log_n.tobytes() and np.array_equal(a.tau, b.tau)


def test_forced_partition():
    s = make_split(0, 4, 2, 2)
    assert sorted(s.fit_indices.tolist() + s.test_indices.tolist()) == [1, 2, 3, 4]


def test_split_is_deterministic():
    assert make_split(0, 4, 2, 2) == make_split(0, 4, 2, 2)
    assert make_split(7, 1000, 30, 40) != make_split(8, 1000, 30, 40)


def test_infeasible_split():
    with pytest.raises(ValueError):
        make_split(0, 10, 6, 5)


def test_test_draws_continue_the_fit_stream():
    a = make_split(5, 1000, 10, 20)
    b = make_split(5, 1000, 10, 1)
    assert np.array_equal(a.fit_indices, b.fit_indices)
    assert a.test_indices[0] == b.test_indices[0]


def test_full_scale_split_sizes():
    s = make_split(123, 10**7, 50_000, 50_000)
    assert s.fit_indices.size == 50_000 and s.test_indices.size == 50_000
    assert np.intersect1d(s.fit_indices, s.test_indices).size == 0
    assert s.fit_indices.min() >= 1 and s.test_indices.max() <= 10**7


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32), total=st.integers(2, 3000), data=st.data())
def test_split_properties(seed, total, data):
    n_fit = data.draw(st.integers(1, total - 1))
    n_test = data.draw(st.integers(1, total - n_fit))
    s = make_split(seed, total, n_fit, n_test)
    both = np.concatenate([s.fit_indices, s.test_indices])
    assert s.fit_indices.size == n_fit and s.test_indices.size == n_test
    assert np.unique(both).size == both.size
    assert both.min() >= 1 and both.max() <= total
    assert s == make_split(seed, total, n_fit, n_test)


def test_split_roughly_uniform():
    s = make_split(1, 100, 60, 30)
    counts = np.zeros(100)
    for seed in range(400):
        counts[make_split(seed, 100, 10, 1).fit_indices - 1] += 1
    # each index is drawn with probability 1/10 per split
    assert np.all(np.abs(counts / 400 - 0.1) < 0.075)
    assert s.fit_indices.size == 60


def test_split_json_roundtrip(tmp_path):
    s = make_split(3, 50, 5, 7)
    s.save(tmp_path / "s.json")
    d = json.loads((tmp_path / "s.json").read_text())
    assert set(d) == {"seed", "n_total", "n_fit", "n_test", "fit_indices", "test_indices"}
    assert SplitSpec.load(tmp_path / "s.json") == s
