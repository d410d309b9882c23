"""Sliding-window splits, classification metrics, relative improvement and Welch's t-test."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BaselineZero, DegenerateGroup, InsufficientSpan, LengthMismatch
from .stats import t_two_sided

METRIC_NAMES = ("recall", "precision", "f_score", "accuracy")


def sliding_window_split(timestamps: np.ndarray, window_count: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Cut the time range into ``window_count + 1`` equal spans.

    Window ``w`` (1-based) tests on span ``w`` and trains on every earlier span.
    """
    ts = np.asarray(timestamps, dtype=np.int64)
    if window_count < 1:
        raise ValueError("window_count must be >= 1")
    n_spans = window_count + 1
    lo, hi = int(ts.min()), int(ts.max())
    if hi == lo:
        raise InsufficientSpan("all timestamps are equal")
    span = np.minimum(((ts - lo) * n_spans) // (hi - lo + 1), n_spans - 1)
    splits = []
    for w in range(1, n_spans):
        train, test = span < w, span == w
        if not train.any() or not test.any():
            raise InsufficientSpan(f"window {w} has an empty train or test span")
        splits.append((train, test))
    return splits


def confusion(y_true: np.ndarray, y_pred: np.ndarray) -> tuple[int, int, int, int]:
    y_true = np.asarray(y_true).astype(bool)
    y_pred = np.asarray(y_pred).astype(bool)
    if y_true.shape != y_pred.shape:
        raise LengthMismatch(f"{y_true.shape} vs {y_pred.shape}")
    tp = int(np.sum(y_true & y_pred))
    fp = int(np.sum(~y_true & y_pred))
    fn = int(np.sum(y_true & ~y_pred))
    tn = int(np.sum(~y_true & ~y_pred))
    return tp, fp, fn, tn


def metrics_from_counts(tp: int, fp: int, fn: int, tn: int) -> dict[str, float]:
    recall = tp / (tp + fn) if tp + fn else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    f = 2 * precision * recall / (precision + recall) if precision > 0 and recall > 0 else 0.0
    total = tp + fp + fn + tn
    return {
        "recall": recall,
        "precision": precision,
        "f_score": f,
        "accuracy": (tp + tn) / total if total else 0.0,
    }


def metrics(y_true: np.ndarray, y_pred: np.ndarray) -> dict[str, float]:
    return metrics_from_counts(*confusion(y_true, y_pred))


def rela_impr(metric_method: float, metric_baseline: float) -> float:
    """Relative improvement over the baseline, in percent."""
    if metric_baseline <= 0:
        raise BaselineZero("baseline metric must be positive")
    return (metric_method / metric_baseline - 1.0) * 100.0


def welch_t_test(values: np.ndarray, groups: np.ndarray) -> tuple[float, float]:
    """Two-sided Welch test of group 1 against group 0. Returns (t, p)."""
    values = np.asarray(values, dtype=np.float64)
    groups = np.asarray(groups).astype(bool)
    if values.shape != groups.shape:
        raise LengthMismatch("values and groups differ in length")
    a, b = values[groups], values[~groups]
    if len(a) < 2 or len(b) < 2:
        raise DegenerateGroup("each group needs at least two values")
    # exact check: float noise in var() would otherwise turn constants into t = 0
    if np.ptp(a) == 0 and np.ptp(b) == 0:
        raise DegenerateGroup("both groups have zero variance")
    va, vb = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    se2 = va + vb
    t = (a.mean() - b.mean()) / math.sqrt(se2)
    df = se2 * se2 / (va * va / (len(a) - 1) + vb * vb / (len(b) - 1))
    return float(t), t_two_sided(float(t), float(df))


@dataclass(frozen=True)
class SignificanceRow:
    column: int
    semantics: str
    t: float
    p: float
    significant: bool


def significance_report(
    Z: np.ndarray,
    y_true: np.ndarray,
    test_mask: np.ndarray,
    semantics: Sequence[str],
    *,
    sample_size: int = 1000,
    alpha: float = 0.05,
    seed: int = 0,
) -> list[SignificanceRow]:
    """Welch test of every feature column between fraud and normal test transactions.

    ``sample_size`` test rows are drawn without replacement (all rows if fewer).
    Degenerate columns are reported with NaN statistics and not significant.
    """
    test_idx = np.flatnonzero(test_mask)
    rng = np.random.default_rng(seed)
    if len(test_idx) > sample_size:
        test_idx = np.sort(rng.choice(test_idx, size=sample_size, replace=False))
    groups = np.asarray(y_true)[test_idx] == 1
    rows = []
    for k in range(Z.shape[1]):
        try:
            t, p = welch_t_test(Z[test_idx, k], groups)
        except DegenerateGroup:
            t, p = math.nan, math.nan
        rows.append(SignificanceRow(k, semantics[k], t, p, bool(p < alpha)))
    return rows
