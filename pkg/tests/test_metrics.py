from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spillnet.decomposition import FevdTable
from spillnet.errors import SpillnetError
from spillnet.metrics import export_table, read_table_csv, spillover_summary, table_csv, table_dot

DATA = Path(__file__).parent / "data"


def market_table():
    shares = np.loadtxt(DATA / "market_table_pct.csv", delimiter=",", skiprows=1) / 100
    mask = np.loadtxt(DATA / "market_table_mask.csv", delimiter=",", skiprows=1).astype(int)
    labels = (DATA / "market_table_pct.csv").read_text().splitlines()[0].split(",")
    return shares, mask, labels


def test_identity_table_empty_mask():
    s = spillover_summary(np.eye(3), np.eye(3))
    assert s.total_index == 0
    assert not s.fix.any() and not s.tix.any() and not s.nix.any()
    assert not s.in_deg.any() and not s.out_deg.any()


def test_printed_market_table_full_mask():
    shares, _, labels = market_table()
    s = spillover_summary(shares)
    assert round(s.fix[labels.index("US")]) == 6
    assert round(s.fix[labels.index("UK")]) == 44
    assert s.total_index == pytest.approx(35.5, abs=0.5)


def test_printed_market_table_shaded_mask():
    shares, mask, labels = market_table()
    s = spillover_summary(shares, mask)
    assert s.in_deg[labels.index("US")] == 2
    assert s.out_deg[labels.index("US")] == 18
    assert s.out_deg[labels.index("CL")] == 0


def test_masked_versus_dense():
    t = np.array([[0.8, 0.2], [0.3, 0.7]])
    mask = np.array([[1, 0], [1, 1]])
    assert spillover_summary(t, mask).fix.tolist() == pytest.approx([0, 30])
    assert spillover_summary(t, mask, use_mask=False).fix.tolist() == pytest.approx([20, 30])


tables = st.integers(2, 6).flatmap(lambda m: st.tuples(
    arrays(np.float64, (m, m), elements=st.floats(0.001, 1)),
    arrays(np.int64, (m, m), elements=st.integers(0, 1)),
))


@settings(max_examples=60, deadline=None)
@given(tables)
def test_summary_invariants(tm):
    raw, mask = tm
    shares = raw / raw.sum(axis=1, keepdims=True)
    m = shares.shape[0]
    s = spillover_summary(shares, mask)
    np.testing.assert_allclose(s.nix, s.tix - s.fix)
    assert abs(s.nix.sum()) < 1e-9
    edges = int((mask * (1 - np.eye(m))).sum())
    assert s.in_deg.sum() == s.out_deg.sum() == edges
    assert s.in_deg.min() >= 0 and s.in_deg.max() <= m - 1
    full = spillover_summary(shares)
    assert full.total_index + np.mean(np.diag(shares)) * 100 == pytest.approx(100, abs=0.1)


def test_dimension_mismatch():
    with pytest.raises(SpillnetError):
        spillover_summary(np.eye(3), np.eye(2))


def test_dot_empty_mask_isolated_nodes():
    text = table_dot(np.eye(3), None)
    assert text.count("->") == 0 and text.count("mass=") == 3


def test_dot_full_mask_two_nodes():
    t = np.array([[0.75, 0.25], [0.4, 0.6]])
    text = table_dot(t, np.ones((2, 2)), ["a", "b"])
    assert '"b" -> "a" [weight=0.25]' in text
    assert '"a" -> "b" [weight=0.4]' in text
    assert text.count("->") == 2
    assert '"a" [mass=65.0, net_sign=1]' in text


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31))
def test_csv_round_trip(m, seed):
    raw = np.random.default_rng(seed).uniform(size=(m, m))
    shares = raw / raw.sum(axis=1, keepdims=True)
    labels, back = read_table_csv(table_csv(FevdTable(shares, "fevd", 5), np.ones((m, m))))
    assert len(labels) == m
    np.testing.assert_allclose(back, shares, atol=0.0005 + 1e-12)


def test_export_formats(tmp_path):
    shares, mask, labels = market_table()
    for fmt in ("csv", "json", "dot"):
        path = export_table(shares, mask, tmp_path / f"t.{fmt}", labels=labels)
        assert path.stat().st_size > 0
    with pytest.raises(SpillnetError, match="format"):
        export_table(shares, mask, tmp_path / "t.xlsx")


def test_export_unwritable(tmp_path):
    with pytest.raises(SpillnetError, match="cannot write"):
        export_table(np.eye(2), None, tmp_path / "missing" / "t.csv")
