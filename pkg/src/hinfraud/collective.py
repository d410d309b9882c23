"""Iterative collective prediction over meta-path features.

Iteration 0 is a classifier trained on the base features only. Every later
iteration takes a frozen snapshot of the labels (train truth plus current
test predictions), recomputes all meta-path features from it, fits a fresh
classifier on ``[X, Z]`` and relabels every test transaction at once.
"""

from __future__ import annotations

import logging
import time
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .classify import ClassifierSpec, TrainedModel, fit, predict_proba
from .data import LabelState
from .errors import EmptyTestSet, LengthMismatch, NonConvergenceWarning
from .evaluation import metrics
from .features import FeatureOptions, compute_all_features
from .hin import Hin
from .metapath import DownsizedPath, MetaPathPair, downsized_paths, pair_paths

log = logging.getLogger(__name__)

FeatureFn = Callable[..., np.ndarray]


@dataclass(frozen=True)
class LoopConfig:
    max_iterations: int = 10
    early_stop_fraction: float = 0.001
    classifier: ClassifierSpec = field(default_factory=ClassifierSpec)
    features: FeatureOptions = field(default_factory=FeatureOptions)
    threads: int = 1

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0.0 <= self.early_stop_fraction < 1.0:
            raise ValueError("early_stop_fraction must lie in [0, 1)")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    test_labels: np.ndarray
    test_proba: np.ndarray
    change_fraction: float | None
    metrics: dict[str, float] | None


@dataclass
class LoopHistory:
    records: list[IterationRecord] = field(default_factory=list)
    converged_at: int | None = None

    def __len__(self) -> int:
        return len(self.records)

    def metric(self, name: str) -> list[float]:
        return [r.metrics[name] for r in self.records]


@dataclass
class BaselineResult:
    model: TrainedModel
    test_labels: np.ndarray
    test_proba: np.ndarray


@dataclass
class CollectiveResult:
    test_labels: np.ndarray
    test_proba: np.ndarray
    history: LoopHistory
    model: TrainedModel
    paths: list[DownsizedPath]
    pairs: list[MetaPathPair]
    final_features: np.ndarray
    timings: dict[str, float]


def label_change_fraction(prev: np.ndarray, curr: np.ndarray) -> float:
    prev, curr = np.asarray(prev), np.asarray(curr)
    if prev.shape != curr.shape:
        raise LengthMismatch(f"{prev.shape} vs {curr.shape}")
    if prev.size == 0:
        return 0.0
    return float(np.count_nonzero(prev != curr)) / prev.size


def _fit_predict(spec: ClassifierSpec, X: np.ndarray, labels: LabelState, threads: int):
    model = fit(spec, X[labels.train], labels.y[labels.train], threads=threads)
    proba = predict_proba(model, X[labels.test])
    return model, proba, (proba >= spec.threshold).astype(np.int8)


def run_baseline(X: np.ndarray, labels: LabelState, spec: ClassifierSpec, threads: int = 1) -> BaselineResult:
    """Fit on base features only and write the test predictions into ``labels``."""
    if not labels.test.any():
        raise EmptyTestSet("no test transactions; nothing to predict")
    model, proba, pred = _fit_predict(spec, X, labels, threads)
    labels.update_test(pred, proba)
    return BaselineResult(model, pred, proba)


def run_collective(
    hin: Hin | None,
    X: np.ndarray,
    labels: LabelState,
    config: LoopConfig,
    *,
    y_true: np.ndarray | None = None,
    paths: Sequence[DownsizedPath] | None = None,
    feature_fn: FeatureFn = compute_all_features,
) -> CollectiveResult:
    """Baseline, then feature-augmented rounds until the labels settle or the cap is hit.

    ``y_true`` (full length) enables per-iteration metrics on the test rows.
    ``labels`` is mutated in place: its test entries end as the final predictions.
    ``hin`` may be None when ``paths`` is given.
    """
    timings: dict[str, float] = defaultdict(float)
    truth_test = None if y_true is None else np.asarray(y_true)[labels.test]

    def record(it: int, pred, proba, change) -> IterationRecord:
        m = None if truth_test is None else metrics(truth_test, pred)
        return IterationRecord(it, pred.copy(), proba.copy(), change, m)

    t0 = time.perf_counter()
    if paths is None:
        paths = downsized_paths(hin, threads=config.threads)
    pairs = pair_paths(paths)
    timings["paths"] += time.perf_counter() - t0

    t0 = time.perf_counter()
    base = run_baseline(X, labels, config.classifier, threads=config.threads)
    timings["baseline"] += time.perf_counter() - t0
    history = LoopHistory([record(0, base.test_labels, base.test_proba, None)])
    model, prev = base.model, base.test_labels
    prior = labels.prior

    def features() -> np.ndarray:
        snapshot = labels.snapshot(soft=config.features.soft_labels)
        return feature_fn(paths, pairs, snapshot, prior=prior, options=config.features, threads=config.threads)

    for it in range(1, config.max_iterations + 1):
        t0 = time.perf_counter()
        Z = features()
        timings["features"] += time.perf_counter() - t0
        t0 = time.perf_counter()
        model, proba, pred = _fit_predict(config.classifier, np.hstack([X, Z]), labels, config.threads)
        timings["classifier"] += time.perf_counter() - t0
        change = label_change_fraction(prev, pred)
        labels.update_test(pred, proba)
        if not labels.train_intact():
            raise AssertionError("training labels were modified during the loop")
        history.records.append(record(it, pred, proba, change))
        log.info("iteration %d: label change %.4f", it, change)
        prev = pred
        # with eps = 0 the loop runs to the cap, but unchanged labels still count as settled
        if history.converged_at is None and (change < config.early_stop_fraction or change == 0.0):
            history.converged_at = it
        if change < config.early_stop_fraction:
            break
    if history.converged_at is None:
        warnings.warn(
            f"labels still changing after {config.max_iterations} iterations", NonConvergenceWarning, stacklevel=2
        )

    t0 = time.perf_counter()
    final_Z = features()
    timings["features"] += time.perf_counter() - t0
    return CollectiveResult(
        prev, history.records[-1].test_proba, history, model, list(paths), pairs, final_Z, dict(timings)
    )
