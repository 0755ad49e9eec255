import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spillnet.decomposition import ContributionMatrix
from spillnet.errors import SelectionError
from spillnet.montecarlo import StudyConfig, run_study
from spillnet.sparsify import apply_mask, default_lambda, ic_curve, select_k, sparsify


def cm(values, kind="fevd"):
    return ContributionMatrix(np.asarray(values, dtype=float), kind, 5)


def offdiag_desc(v):
    m = v.shape[0]
    return sorted((v[i, j] for i in range(m) for j in range(m) if i != j), reverse=True)


contrib_matrices = st.integers(2, 6).flatmap(
    lambda m: arrays(np.float64, (m, m), elements=st.floats(0, 1.0 / m, allow_subnormal=False))
)


def test_two_series_arithmetic():
    tr = ic_curve(cm([[0.4, 0.5], [0.1, 0.5]]), 100, 1.0)
    assert tr.ic_values[0] == pytest.approx(200 * math.log(1.5) + 1)
    assert tr.ic_values[1] == pytest.approx(200 * math.log(1.4) + 2)


@settings(max_examples=60, deadline=None)
@given(contrib_matrices, st.integers(2, 5000), st.floats(0, 50))
def test_ic_matches_recomputation(values, t_len, lam):
    m = values.shape[0]
    desc = offdiag_desc(values)
    expected = [2 * t_len * math.log(m - sum(desc[:k])) + k * lam for k in range(1, m * m - m + 1)]
    np.testing.assert_allclose(ic_curve(cm(values), t_len, lam).ic_values, expected, rtol=1e-10, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(contrib_matrices, st.floats(0.01, 50))
def test_select_is_first_argmin(values, lam):
    tr = ic_curve(cm(values), 500, lam)
    best = min(range(len(tr.ic_values)), key=lambda q: (tr.ic_values[q], q))
    assert select_k(tr) == best + 1


def test_zero_penalty_keeps_everything():
    v = np.full((3, 3), 0.1)
    assert select_k(ic_curve(cm(v), 100, 0.0)) == 6


def test_non_positive_base_is_infinite_from_then_on():
    v = np.array([[1.0, 1.5], [1.2, 1.0]])
    tr = ic_curve(cm(v, "gfevd"), 100, 1.0)
    assert math.isfinite(tr.ic_values[0]) and math.isinf(tr.ic_values[1])
    assert tr.to_list()[1] is None


def test_t_factor_switch():
    v = np.array([[0.4, 0.5], [0.1, 0.5]])
    tr = ic_curve(cm(v, "gfevd"), 100, 1.0, t_factor=False)
    assert tr.ic_values[0] == pytest.approx(2 * math.log(1.5) + 1)


def test_tie_at_boundary_keeps_row_major_first():
    v = np.array([[1, 0.5, 0.3], [0.3, 1, 0.1], [0, 0, 1]])
    sel = apply_mask(cm(v), 2)
    assert sel.active_set == [(0, 1), (0, 2)]
    other = {(0, 1), (1, 0)}
    assert set(sel.active_set) != other


def test_full_mask():
    v = np.random.default_rng(0).uniform(size=(4, 4))
    sel = apply_mask(cm(v), 12)
    assert np.all(sel.mask == 1)
    np.testing.assert_array_equal(sel.masked_contrib.values, v)


def test_single_nonzero():
    v = np.eye(3)
    v[2, 0] = 0.2
    assert apply_mask(cm(v), 1).active_set == [(2, 0)]


def test_k_out_of_range():
    with pytest.raises(SelectionError):
        apply_mask(cm(np.eye(3)), 0)
    with pytest.raises(SelectionError):
        apply_mask(cm(np.eye(3)), 7)


def test_all_zero_offdiagonal_forces_one_slot():
    sel = sparsify(cm(np.eye(4)), 500, math.log(500))
    assert sel.k_hat == 1 and sel.active_set == [(0, 1)]
    assert sel.masked_contrib.values[0, 1] == 0


def test_dominant_edge_selected():
    rng = np.random.default_rng(4)
    v = np.eye(5) * 0.9 + rng.uniform(0, 1e-4, (5, 5)) * (1 - np.eye(5))
    v[3, 1] = 0.9
    sel = sparsify(cm(v), 1000, math.log(1000))
    assert sel.k_hat == 1 and sel.active_set == [(3, 1)]


@settings(max_examples=60, deadline=None)
@given(contrib_matrices, st.floats(0.01, 100), st.data())
def test_ranking_is_scale_free(values, c, data):
    m = values.shape[0]
    k = data.draw(st.integers(1, m * m - m))
    a = apply_mask(cm(values), k)
    b = apply_mask(cm(values * c), k)
    np.testing.assert_array_equal(a.mask, b.mask)


@settings(max_examples=60, deadline=None)
@given(contrib_matrices, st.data())
def test_mask_invariants(values, data):
    m = values.shape[0]
    k = data.draw(st.integers(1, m * m - m))
    sel = apply_mask(cm(values), k)
    assert np.all(np.diag(sel.mask) == 1)
    assert len(sel.active_set) == k == int(sel.mask.sum()) - m
    kept = [values[i, j] for i, j in sel.active_set]
    dropped = [values[i, j] for i, j in itertools.product(range(m), range(m)) if i != j and not sel.mask[i, j]]
    if dropped:
        assert min(kept) >= max(dropped)
    off = ~np.eye(m, dtype=bool)
    np.testing.assert_array_equal(sel.masked_contrib.values[~off], values[~off])
    again = apply_mask(sel.masked_contrib, k)
    np.testing.assert_array_equal(again.masked_contrib.values, sel.masked_contrib.values)


def test_json_uses_zero_based_indices():
    v = np.eye(2)
    v[1, 0] = 0.3
    doc = sparsify(cm(v), 100, 1.0).to_dict()
    assert doc["active_set"] == [[1, 0]] and doc["index_base"] == 0
    assert set(doc) >= {"k_hat", "lambda", "active_set", "masked", "ic"}


def test_default_lambda_rules():
    assert default_lambda(1000) == pytest.approx(math.log(1000))
    assert default_lambda(1000, 10, "log/m") == pytest.approx(math.log(1000) / 10)
    with pytest.raises(SelectionError):
        default_lambda(1000, 10, "bogus")


def test_recovery_probability_rises_with_sample_size():
    hit = {}
    for t_len in (500, 1000, 2000):
        cfg = StudyConfig(dgp="S1", t_lens=(t_len,), horizons=(5,), kinds=("gfevd",), replications=100, seed=7, lambda_rule="log")
        rep = run_study(cfg, workers=1)
        hit[t_len] = np.mean([r["k_hat"] == 16 for r in rep.rows])
    assert hit[500] <= hit[1000] <= hit[2000]
    assert hit[2000] >= 0.5
