"""Base classifiers: L2 logistic regression by full-batch gradient descent and a bagged forest."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from . import forest as _forest
from .errors import ConfigInvalid, NonFiniteFeature, ShapeMismatch, SingleClassTrainingSet

LOGISTIC = "logistic_regression"
FOREST = "random_forest"
MODEL_FORMAT = "hinfraud-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = FOREST
    # logistic regression
    learning_rate: float = 0.1
    epochs: int = 200
    l2: float = 1e-4
    standardize: bool = True
    # random forest
    n_trees: int = 100
    max_depth: int = 12
    max_features: Any = "sqrt"
    min_samples_leaf: int = 1
    n_bins: int = 32
    bootstrap: bool = True
    # shared
    class_weight: str | None = None
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in (LOGISTIC, FOREST):
            raise ConfigInvalid(f"unknown classifier kind {self.kind!r}")
        if self.n_trees < 1 or self.epochs < 1 or self.max_depth < 0:
            raise ConfigInvalid("n_trees and epochs must be >= 1, max_depth >= 0")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigInvalid(f"threshold must lie in [0, 1], got {self.threshold}")
        if self.class_weight not in (None, "balanced"):
            raise ConfigInvalid(f"class_weight must be None or 'balanced', got {self.class_weight!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigInvalid(f"unknown classifier options {sorted(extra)}")
        return cls(**d)


@dataclass(frozen=True)
class TrainedModel:
    kind: str
    spec: ClassifierSpec
    n_features: int
    params: dict = field(repr=False)

    def to_dict(self) -> dict:
        if self.kind == LOGISTIC:
            params = {k: [float(v) for v in np.atleast_1d(a)] for k, a in self.params.items()}
        else:
            params = {"trees": [t.to_dict() for t in self.params["trees"]]}
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": self.kind,
            "hyperparameters": asdict(self.spec),
            "n_features": self.n_features,
            "parameters": params,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
            raise ConfigInvalid("not a supported model file")
        spec = ClassifierSpec.from_dict(d["hyperparameters"])
        raw = d["parameters"]
        if d["kind"] == LOGISTIC:
            params = {k: np.asarray(v, dtype=np.float64) for k, v in raw.items()}
            params["bias"] = float(params["bias"][0])
        else:
            params = {"trees": [_forest.Tree.from_dict(t) for t in raw["trees"]]}
        return cls(d["kind"], spec, int(d["n_features"]), params)


def save_model(model: TrainedModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    return TrainedModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _sigmoid(s: np.ndarray) -> np.ndarray:
    out = np.empty_like(s, dtype=np.float64)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def logistic_loss_grad(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float, sample_weight: np.ndarray | None = None
) -> tuple[float, np.ndarray, float]:
    """Weighted mean log-loss plus ``l2/2 * |w|^2``, and its gradient in (w, b)."""
    sw = np.ones(len(y)) if sample_weight is None else sample_weight
    total = sw.sum()
    s = X @ w + b
    loss = float(np.sum(sw * (np.logaddexp(0.0, s) - y * s)) / total + 0.5 * l2 * (w @ w))
    r = sw * (_sigmoid(s) - y) / total
    return loss, X.T @ r + l2 * w, float(r.sum())


def _class_weights(y: np.ndarray, mode: str | None) -> np.ndarray:
    if mode is None:
        return np.ones(len(y))
    n1 = y.sum()
    n0 = len(y) - n1
    return np.where(y == 1, len(y) / (2.0 * n1), len(y) / (2.0 * n0))


def fit(spec: ClassifierSpec, X: np.ndarray, y: np.ndarray, threads: int = 1) -> TrainedModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise ShapeMismatch(f"X {X.shape} and y {y.shape} disagree")
    if not np.isfinite(X).all():
        raise NonFiniteFeature("training matrix contains NaN or inf")
    if len(np.unique(y)) < 2:
        raise SingleClassTrainingSet("training labels contain a single class")
    sw = _class_weights(y, spec.class_weight)
    if spec.kind == LOGISTIC:
        params = _fit_logistic(spec, X, y, sw)
    else:
        trees = _forest.fit_forest(
            X, y, sw,
            n_trees=spec.n_trees, max_depth=spec.max_depth, max_features=spec.max_features,
            min_samples_leaf=spec.min_samples_leaf, n_bins=spec.n_bins, bootstrap=spec.bootstrap,
            seed=spec.seed, threads=threads,
        )
        params = {"trees": trees}
    return TrainedModel(spec.kind, spec, X.shape[1], params)


def _fit_logistic(spec: ClassifierSpec, X: np.ndarray, y: np.ndarray, sw: np.ndarray) -> dict:
    d = X.shape[1]
    if spec.standardize:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        # float noise makes std of a constant column ~1e-17 rather than 0
        scale[scale <= 1e-12 * np.maximum(1.0, np.abs(mean))] = 1.0
    else:
        mean, scale = np.zeros(d), np.ones(d)
    Xs = (X - mean) / scale
    w, b = np.zeros(d), 0.0
    for _ in range(spec.epochs):
        _, gw, gb = logistic_loss_grad(w, b, Xs, y, spec.l2, sw)
        w -= spec.learning_rate * gw
        b -= spec.learning_rate * gb
    return {"weights": w, "bias": b, "mean": mean, "scale": scale}


def logistic_model(weights, bias: float, spec: ClassifierSpec | None = None) -> TrainedModel:
    """Logistic model with given raw-space parameters (no standardization)."""
    w = np.asarray(weights, dtype=np.float64)
    spec = replace(spec or ClassifierSpec(kind=LOGISTIC), kind=LOGISTIC, standardize=False)
    params = {"weights": w, "bias": float(bias), "mean": np.zeros(len(w)), "scale": np.ones(len(w))}
    return TrainedModel(LOGISTIC, spec, len(w), params)


def predict_proba(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeMismatch(f"model fit on {model.n_features} columns, got {X.shape}")
    if model.kind == LOGISTIC:
        p = model.params
        return _sigmoid(((X - p["mean"]) / p["scale"]) @ p["weights"] + p["bias"])
    votes = np.zeros(len(X))
    for tree in model.params["trees"]:
        votes += tree.predict_value(X) >= 0.5
    return votes / len(model.params["trees"])


def predict_labels(model: TrainedModel, X: np.ndarray, threshold: float | None = None) -> np.ndarray:
    """1 iff probability >= threshold (ties go to fraud)."""
    t = model.spec.threshold if threshold is None else threshold
    return (predict_proba(model, X) >= t).astype(np.int8)
