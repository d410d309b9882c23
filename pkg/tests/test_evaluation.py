from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from hinfraud.errors import BaselineZero, DegenerateGroup, InsufficientSpan, LengthMismatch
from hinfraud.evaluation import (
    confusion,
    metrics,
    metrics_from_counts,
    rela_impr,
    significance_report,
    sliding_window_split,
    welch_t_test,
)
from hinfraud.stats import betainc, t_sf, t_two_sided


def test_metrics_fixture():
    m = metrics_from_counts(tp=3, fp=1, fn=2, tn=4)
    assert m["recall"] == pytest.approx(0.6)
    assert m["precision"] == pytest.approx(0.75)
    assert m["f_score"] == pytest.approx(2 / 3)
    assert m["accuracy"] == pytest.approx(0.7)


def test_metrics_perfect_and_all_negative():
    y = np.array([0, 1, 1, 0, 1])
    assert metrics(y, y) == {"recall": 1.0, "precision": 1.0, "f_score": 1.0, "accuracy": 1.0}
    m = metrics(y, np.zeros(5))
    assert m["recall"] == 0 and m["precision"] == 0 and m["f_score"] == 0
    assert m["accuracy"] == pytest.approx(0.4)


def test_metrics_length_mismatch():
    with pytest.raises(LengthMismatch):
        metrics(np.zeros(3), np.zeros(4))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_metric_identities(tp, fp, fn, tn):
    y_true = np.r_[np.ones(tp + fn), np.zeros(fp + tn)]
    y_pred = np.r_[np.ones(tp), np.zeros(fn), np.ones(fp), np.zeros(tn)]
    assert confusion(y_true, y_pred) == (tp, fp, fn, tn)
    m = metrics(y_true, y_pred)
    n = tp + fp + fn + tn
    if n:
        assert m["accuracy"] == pytest.approx((tp + tn) / n)
    p, r, f = m["precision"], m["recall"], m["f_score"]
    if p > 0 and r > 0:
        lo, hi = min(p, r), max(p, r)
        assert f <= 2 * lo / (1 + lo / hi) + 1e-12
        assert lo - 1e-12 <= f <= hi + 1e-12


def test_rela_impr_reference_values():
    assert rela_impr(0.7271, 0.6737) == pytest.approx(7.93, abs=0.005)
    # the rounded inputs give 4.614; the reference was computed before rounding
    assert rela_impr(0.8253, 0.7889) == pytest.approx(4.62, abs=0.01)
    assert rela_impr(0.5, 0.5) == 0.0
    with pytest.raises(BaselineZero):
        rela_impr(0.5, 0.0)


def test_welch_textbook_fixture():
    # unit sample variance, means 2 and 1, n = 10 each
    base = np.array([-1.5, -1, -0.5, 0, 0, 0, 0, 0.5, 1, 1.5])
    base = base / base.std(ddof=1)
    a, b = base + 2.0, base + 1.0
    t, p = welch_t_test(np.r_[a, b], np.r_[np.ones(10), np.zeros(10)])
    assert t == pytest.approx(math.sqrt(5), rel=1e-12)
    assert p == pytest.approx(2 * stats.t.sf(math.sqrt(5), 18), rel=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_welch_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(0.3, 1.0, int(rng.integers(5, 60)))
    b = rng.normal(0.0, 2.0, int(rng.integers(5, 60)))
    t, p = welch_t_test(np.r_[a, b], np.r_[np.ones(len(a)), np.zeros(len(b))])
    ref = stats.ttest_ind(a, b, equal_var=False)
    assert t == pytest.approx(ref.statistic, rel=1e-10)
    assert p == pytest.approx(ref.pvalue, rel=1e-7)


def test_welch_sign_symmetry():
    rng = np.random.default_rng(4)
    v = rng.standard_normal(40)
    g = np.arange(40) % 3 == 0
    t1, p1 = welch_t_test(v, g)
    t2, p2 = welch_t_test(v, ~g)
    assert t1 == pytest.approx(-t2) and p1 == pytest.approx(p2)


def test_welch_large_effect_tiny_p():
    rng = np.random.default_rng(0)
    v = np.r_[rng.normal(0, 1, 500), rng.normal(1, 1, 500)]
    _, p = welch_t_test(v, np.r_[np.zeros(500), np.ones(500)])
    assert p < 1e-10


def test_welch_degenerate():
    with pytest.raises(DegenerateGroup):
        welch_t_test(np.ones(6), np.array([1, 1, 1, 0, 0, 0]))
    with pytest.raises(DegenerateGroup):
        welch_t_test(np.arange(5.0), np.array([1, 0, 0, 0, 0]))


@pytest.mark.parametrize("a,b,x", [(0.5, 0.5, 0.3), (2.0, 3.0, 0.9), (9.0, 0.5, 0.99), (50.0, 0.5, 0.2), (1.0, 1.0, 0.0)])
def test_betainc_against_scipy(a, b, x):
    assert betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), rel=1e-10, abs=1e-300)


@settings(max_examples=80, deadline=None)
@given(t=st.floats(-60, 60), df=st.floats(0.5, 500))
def test_t_sf_against_scipy(t, df):
    assert t_sf(t, df) == pytest.approx(stats.t.sf(t, df), rel=1e-8, abs=1e-300)
    assert t_two_sided(t, df) == pytest.approx(2 * stats.t.sf(abs(t), df), rel=1e-8, abs=1e-300)


def test_sliding_window_eight_spans():
    ts = np.arange(0, 800)
    splits = sliding_window_split(ts, 7)
    assert len(splits) == 7
    train_sizes = [tr.sum() for tr, _ in splits]
    assert train_sizes == sorted(train_sizes) and train_sizes[0] == 100
    tests = [te for _, te in splits]
    for i in range(7):
        assert tests[i].sum() == 100
        for j in range(i + 1, 7):
            assert not (tests[i] & tests[j]).any()
            assert ts[tests[i]].max() < ts[tests[j]].min()
    for tr, te in splits:
        assert ts[tr].max() < ts[te].min()


def test_sliding_window_single_holdout_and_errors():
    ts = np.arange(10)
    (tr, te), = sliding_window_split(ts, 1)
    assert tr.sum() == 5 and te.sum() == 5
    with pytest.raises(InsufficientSpan):
        sliding_window_split(np.full(10, 3), 2)


def test_significance_report_flags_informative_column():
    rng = np.random.default_rng(0)
    n = 3000
    y = (rng.random(n) < 0.2).astype(int)
    Z = np.c_[y * 0.5 + rng.random(n), rng.random(n), np.full(n, 0.1)]
    test = np.arange(n) >= 1000
    rows = significance_report(Z, y, test, ["sig", "noise", "const"], sample_size=1000, seed=1)
    assert rows[0].significant
    assert math.isnan(rows[2].p) and not rows[2].significant
    assert [r.semantics for r in rows] == ["sig", "noise", "const"]
