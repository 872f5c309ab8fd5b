import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collatzprob import core
from oracles import collatz_steps, odd_states, valuation2


@pytest.mark.parametrize("n, expected", [(1, 0), (2, 1), (27, 111)])
def test_tau_direct_examples(n, expected):
    assert collatz_steps(n) == expected
    assert core.tau_direct(n) == expected


def test_tau_direct_budget_is_an_error():
    with pytest.raises(core.NonConvergence) as info:
        core.tau_direct(27, max_steps=50)
    assert info.value.n == 27 and info.value.max_steps == 50


def test_tau_direct_overflow_is_an_error():
    with pytest.raises(OverflowError):
        core.tau_direct(2**64 - 1)


def test_tau_direct_rejects_zero():
    with pytest.raises(ValueError):
        core.tau_direct(0)


def test_small_table_matches_oracle():
    table = core.build_tau_table(10)
    assert table.values[1:].tolist() == [collatz_steps(n) for n in range(1, 11)]
    assert table.values[1:].tolist() == [0, 1, 7, 2, 5, 8, 16, 3, 19, 6]


def test_single_entry_table():
    table = core.build_tau_table(1)
    assert table.values[1:].tolist() == [0]


def test_table_recurrences(table_1e5):
    v = table_1e5.values.astype(np.int64)
    n = np.arange(1, table_1e5.n_max + 1)
    even = n[n % 2 == 0]
    assert np.all(v[even] == v[even // 2] + 1)
    odd = n[(n % 2 == 1) & (n > 1) & (3 * n + 1 <= table_1e5.n_max)]
    assert np.all(v[odd] == v[3 * odd + 1] + 1)
    assert v[1] == 0


def test_table_uses_narrow_width(table_1e5):
    assert table_1e5.width == 2


def test_parallel_fill_matches_sequential(table_1e5):
    par = core.build_tau_table(table_1e5.n_max, parallel=True, n_chunks=7)
    assert np.array_equal(par.values, table_1e5.values)
    assert par.checksum == table_1e5.checksum


def test_checksum_is_deterministic():
    assert core.build_tau_table(5000).checksum == core.build_tau_table(5000).checksum


@pytest.mark.parametrize("n, expected", [(1, 0), (4, 2), (82, 1)])
def test_v2_examples(n, expected):
    assert core.v2(n) == expected == valuation2(n)


@given(a=st.integers(0, 40), b=st.integers(0, 2**20).map(lambda x: 2 * x + 1))
def test_v2_of_scaled_odd(a, b):
    assert core.v2(2**a * b) == a


def test_odd_block_trace_trivial_cases():
    t = core.odd_block_trace(1)
    assert (t.initial_halvings, t.odd_sequence, t.block_lengths, t.terminal) == (0, [], [], 1)
    t = core.odd_block_trace(4)
    assert t.initial_halvings == 2 and t.odd_sequence == [] and t.tau == 2


def test_odd_block_trace_27():
    t = core.odd_block_trace(27)
    prefix, odds, ks = odd_states(27)
    assert t.odd_sequence == odds and t.block_lengths == ks
    assert t.odd_sequence[0] == 27 and t.block_lengths[0] == 1
    assert len(t.odd_sequence) == 41
    assert t.initial_halvings + sum(1 + k for k in t.block_lengths) == 111


@settings(max_examples=200)
@given(n=st.integers(1, 10**9))
def test_odd_block_trace_invariants(n):
    t = core.odd_block_trace(n)
    assert all(m % 2 == 1 for m in t.odd_sequence)
    assert all(k >= 1 for k in t.block_lengths)
    nxt = t.odd_sequence[1:] + [t.terminal]
    for m, k, m2 in zip(t.odd_sequence, t.block_lengths, nxt):
        assert (3 * m + 1) % 2**k == 0 and (3 * m + 1) // 2**k == m2
    assert t.tau == core.tau_direct(n)


def test_trajectory():
    tr = core.trajectory(6)
    assert tr.states == [6, 3, 10, 5, 16, 8, 4, 2, 1]
    assert tr.tau == 8 == core.tau_direct(6)


def test_block_counts_small():
    c = core.collect_block_lengths(5, 30)
    assert c.shape == (8, 30) and c.sum() == 3
    assert c[1, 1] == 1 and c[3, 0] == 1 and c[5, 3] == 1
    c = core.collect_block_lengths(1, 30)
    assert c.sum() == 1 and c[1, 1] == 1


def test_block_counts_match_enumeration():
    n_max, cap = 2000, 5
    want = np.zeros((8, cap), dtype=np.int64)
    for m in range(1, n_max + 1, 2):
        want[m % 8, min(valuation2(3 * m + 1), cap) - 1] += 1
    assert np.array_equal(core.collect_block_lengths(n_max, cap), want)


def test_block_counts_first_column_density():
    g = core.collect_block_lengths(10**6, 30).sum(axis=0)
    assert abs(g[0] / g.sum() - 0.5) < 1e-5


def test_table_file_roundtrip(tmp_path, table_1e5):
    path = tmp_path / "t.ctau"
    core.save_tau_table(table_1e5, path)
    raw = path.read_bytes()
    assert raw[:4] == b"CTAU"
    assert len(raw) == 4 + 4 + 8 + 1 + 8 + 2 * table_1e5.n_max
    assert int.from_bytes(raw[8:16], "little") == table_1e5.n_max
    assert raw[16] == 2
    # payload starts with tau(1), tau(2), tau(3) little-endian
    assert raw[25:31] == bytes([0, 0, 1, 0, 7, 0])
    back = core.load_tau_table(path)
    assert np.array_equal(back.values, table_1e5.values) and back.checksum == table_1e5.checksum


def test_table_file_detects_corruption(tmp_path):
    table = core.build_tau_table(100)
    path = tmp_path / "t.ctau"
    core.save_tau_table(table, path)
    raw = bytearray(path.read_bytes())
    raw[-1] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(core.TableFormatError):
        core.load_tau_table(path)
    path.write_bytes(b"XXXX" + bytes(raw[4:]))
    with pytest.raises(core.TableFormatError):
        core.load_tau_table(path)


def test_csv_export(tmp_path):
    table = core.build_tau_table(10)
    core.export_csv(table, tmp_path / "tau.csv")
    lines = (tmp_path / "tau.csv").read_text().splitlines()
    assert lines[0] == "n,tau" and lines[1] == "1,0" and lines[3] == "3,7" and len(lines) == 11
