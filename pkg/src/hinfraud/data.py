"""Label state and the on-disk dataset layout (labels, base features, graph)."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import LengthMismatch, SchemaMismatch
from .hin import Hin, load_hin_dir


@dataclass
class LabelState:
    """Ground truth for train rows, current predictions for test rows.

    ``y`` holds hard 0/1 labels. Test entries are only ever written through
    :meth:`update_test`; train entries stay frozen.
    """

    y: np.ndarray
    train: np.ndarray
    timestamps: np.ndarray
    y_pred_proba: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.y = np.asarray(self.y, dtype=np.int8).copy()
        self.train = np.asarray(self.train, dtype=bool).copy()
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        if not (len(self.y) == len(self.train) == len(self.timestamps)):
            raise LengthMismatch("y, train mask and timestamps differ in length")
        if not np.isin(self.y, (0, 1)).all():
            raise SchemaMismatch("labels must be 0/1")
        self._train_truth = self.y[self.train].copy()

    @property
    def test(self) -> np.ndarray:
        return ~self.train

    @property
    def prior(self) -> float:
        """Fraud rate of the training partition."""
        return float(self._train_truth.mean()) if self._train_truth.size else 0.0

    def update_test(self, labels: np.ndarray, proba: np.ndarray | None = None) -> None:
        labels = np.asarray(labels)
        if labels.shape != (int(self.test.sum()),):
            raise LengthMismatch("test label vector has the wrong length")
        self.y[self.test] = labels
        if proba is not None:
            if self.y_pred_proba is None:
                self.y_pred_proba = np.zeros(len(self.y))
            self.y_pred_proba[self.test] = proba

    def snapshot(self, soft: bool = False) -> np.ndarray:
        """Label vector consumed by feature computation (copy, float64)."""
        y = self.y.astype(np.float64)
        if soft and self.y_pred_proba is not None:
            y[self.test] = self.y_pred_proba[self.test]
        return y

    def train_intact(self) -> bool:
        return bool(np.array_equal(self.y[self.train], self._train_truth))


@dataclass(frozen=True)
class Dataset:
    hin: Hin
    X: np.ndarray
    y_true: np.ndarray
    timestamps: np.ndarray

    @property
    def txn_ids(self) -> tuple[str, ...]:
        return self.hin.node_ids[self.hin.schema.target_type]


def read_labels(path: str | Path, txn_ids: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Read ``transaction_id,label,timestamp`` rows aligned to ``txn_ids`` order."""
    index = {t: i for i, t in enumerate(txn_ids)}
    y = np.full(len(txn_ids), -1, dtype=np.int8)
    ts = np.zeros(len(txn_ids), dtype=np.int64)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["transaction_id", "label", "timestamp"]:
            raise SchemaMismatch(f"{path}: unexpected header {header}")
        for row in reader:
            if row[0] not in index:
                raise SchemaMismatch(f"{path}: unknown transaction {row[0]!r}")
            i = index[row[0]]
            if row[1] not in ("0", "1"):
                raise SchemaMismatch(f"{path}: label must be 0/1, got {row[1]!r}")
            y[i] = int(row[1])
            ts[i] = int(row[2])
    if (y < 0).any():
        raise SchemaMismatch(f"{path}: {(y < 0).sum()} transactions have no label")
    return y, ts


def read_features(path: str | Path, txn_ids: Sequence[str]) -> np.ndarray:
    index = {t: i for i, t in enumerate(txn_ids)}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    X = np.full((len(txn_ids), len(header) - 1), np.nan)
    for row in rows:
        if row[0] not in index:
            raise SchemaMismatch(f"{path}: unknown transaction {row[0]!r}")
        X[index[row[0]]] = [float(v) for v in row[1:]]
    if np.isnan(X).any():
        raise SchemaMismatch(f"{path}: missing feature rows")
    return X


def write_csv(path: str | Path, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def fmt(value: float, digits: int = 10) -> str:
    return f"{value:.{digits}g}"


def load_dataset(data_dir: str | Path) -> Dataset:
    data_dir = Path(data_dir)
    hin = load_hin_dir(data_dir)
    txn_ids = hin.node_ids[hin.schema.target_type]
    y, ts = read_labels(data_dir / "labels.csv", txn_ids)
    X = read_features(data_dir / "features.csv", txn_ids)
    return Dataset(hin, X, y, ts)
