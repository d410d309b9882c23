"""Meta-path label-aggregation features.

For a meta-path split as ``P = P1 @ P2.T`` at its smallest node type, the
fast route evaluates ``D1 @ P1 @ (D2 @ P2.T @ y)`` using only vectors of
length ``n`` and ``n_t``. The n-by-n meta-path is never formed. When ``P1``
is simple (one 1 per row), this equals the weighted label fraction
``D @ P @ y`` exactly.

Rows with no meta-path neighbours fall back to ``prior`` (the training
fraud rate). With self-exclusion on, a transaction's own label is removed
from its aggregate.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import EndTypeMismatch, OracleCapExceeded, ShapeMismatch
from .metapath import DownsizedPath, MetaPathPair

DEFAULT_ORACLE_CAP = 2000
# relative weight below which a row counts as having no remaining neighbours
_EMPTY_WEIGHT = 1e-12


@dataclass
class FeatureOptions:
    self_exclusion: bool = True
    soft_labels: bool = False


class PeakTracker:
    """Records the element count of every intermediate a computation allocates."""

    def __init__(self) -> None:
        self.sizes: list[int] = []

    def observe(self, obj) -> None:
        self.sizes.append(int(obj.nnz) if sp.issparse(obj) else int(np.size(obj)))

    @property
    def peak(self) -> int:
        return max(self.sizes, default=0)


def _observe(tracker: PeakTracker | None, *objs) -> None:
    if tracker is not None:
        for obj in objs:
            tracker.observe(obj)


def _inverse_or_zero(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v, dtype=np.float64)
    np.divide(1.0, v, out=out, where=v > 0)
    return out


def _check_pair(P1: DownsizedPath, P2: DownsizedPath, y: np.ndarray) -> None:
    if P1.trace.end_type != P2.trace.end_type:
        raise EndTypeMismatch(f"{P1.trace.end_type!r} != {P2.trace.end_type!r}")
    n = P1.matrix.shape[0]
    if P2.matrix.shape[0] != n or len(y) != n:
        raise ShapeMismatch("paths and label vector disagree on the transaction count")


def _ratio(num: np.ndarray, wt: np.ndarray, prior: float, ref: np.ndarray | None = None) -> np.ndarray:
    ref = wt if ref is None else ref
    ok = wt > _EMPTY_WEIGHT * np.maximum(ref, 1e-300)
    z = np.full(len(num), float(prior))
    np.divide(num, wt, out=z, where=ok)
    return np.clip(z, 0.0, 1.0)


def _decomposed_parts(P1: sp.csr_matrix, P2: sp.csr_matrix, y: np.ndarray, tracker=None):
    col_sums = np.asarray(P2.sum(axis=0)).ravel()
    d2 = _inverse_or_zero(col_sums)
    d1 = _inverse_or_zero(np.asarray(P1.sum(axis=1)).ravel())
    end_mean = d2 * (P2.T @ y)
    num = d1 * (P1 @ end_mean)
    wt = d1 * (P1 @ (col_sums > 0).astype(np.float64))
    _observe(tracker, col_sums, d2, d1, end_mean, num, wt)
    return num, wt, d1, d2


def feature_fast(
    P1: DownsizedPath,
    P2: DownsizedPath,
    y: np.ndarray,
    *,
    prior: float,
    self_exclusion: bool = True,
    tracker: PeakTracker | None = None,
) -> np.ndarray:
    """Weighted label fraction over ``P1 @ P2.T`` in O(nnz(P1) + nnz(P2))."""
    y = np.asarray(y, dtype=np.float64)
    _check_pair(P1, P2, y)
    num, wt, d1, d2 = _decomposed_parts(P1.matrix, P2.matrix, y, tracker)
    if not self_exclusion:
        return _ratio(num, wt, prior)
    diag = _diagonal(P1.matrix, P2.matrix, d1, d2, tracker)
    return _ratio(num - diag * y, wt - diag, prior, ref=wt)


def _diagonal(P1: sp.csr_matrix, P2: sp.csr_matrix, d1: np.ndarray, d2: np.ndarray, tracker=None) -> np.ndarray:
    # row-wise sparse dot: (D1 P1 D2 P2^T)[i, i]
    overlap = P1.multiply(P2)
    diag = d1 * (overlap @ d2)
    _observe(tracker, overlap, diag)
    return diag


def self_exclusion(
    P1: DownsizedPath, P2: DownsizedPath, y: np.ndarray, z_raw: np.ndarray, *, prior: float
) -> np.ndarray:
    """Remove each row's own contribution from an already normalized feature."""
    y = np.asarray(y, dtype=np.float64)
    _check_pair(P1, P2, y)
    _, wt, d1, d2 = _decomposed_parts(P1.matrix, P2.matrix, y)
    diag = _diagonal(P1.matrix, P2.matrix, d1, d2)
    num = np.where(wt > 0, np.asarray(z_raw) * wt, 0.0)
    return _ratio(num - diag * y, wt - diag, prior, ref=wt)


def feature_dense_oracle(
    P1: DownsizedPath,
    P2: DownsizedPath,
    y: np.ndarray,
    *,
    prior: float,
    self_exclusion: bool = True,
    cap: int | None = DEFAULT_ORACLE_CAP,
    tracker: PeakTracker | None = None,
) -> np.ndarray:
    """Weighted label fraction computed on the materialized meta-path ``P1 @ P2.T``."""
    y = np.asarray(y, dtype=np.float64)
    _check_pair(P1, P2, y)
    n = len(y)
    if cap is not None and n > cap:
        raise OracleCapExceeded(f"n={n} exceeds oracle cap {cap}")
    P = (P1.matrix @ P2.matrix.T).tocsr()
    _observe(tracker, P)
    if self_exclusion:
        P = P - sp.diags(P.diagonal())
        P.eliminate_zeros()
    row_sums = np.asarray(P.sum(axis=1)).ravel()
    num = P @ y
    _observe(tracker, row_sums, num)
    return _ratio(num, row_sums, prior)


def decomposed_dense_oracle(
    P1: DownsizedPath,
    P2: DownsizedPath,
    y: np.ndarray,
    *,
    prior: float,
    self_exclusion: bool = True,
    cap: int | None = DEFAULT_ORACLE_CAP,
) -> np.ndarray:
    """Dense n-by-n evaluation of ``D1 P1 D2 P2.T y``, for checking :func:`feature_fast`."""
    y = np.asarray(y, dtype=np.float64)
    _check_pair(P1, P2, y)
    n = len(y)
    if cap is not None and n > cap:
        raise OracleCapExceeded(f"n={n} exceeds oracle cap {cap}")
    A = P1.matrix.toarray()
    B = P2.matrix.toarray()
    r1 = A.sum(axis=1)
    c2 = B.sum(axis=0)
    d1 = np.divide(1.0, r1, out=np.zeros(n), where=r1 > 0)
    d2 = np.divide(1.0, c2, out=np.zeros_like(c2), where=c2 > 0)
    W = (d1[:, None] * A * d2[None, :]) @ B.T
    wt_full = W.sum(axis=1)
    if self_exclusion:
        np.fill_diagonal(W, 0.0)
    return _ratio(W @ y, W.sum(axis=1), prior, ref=wt_full)


@dataclass
class FeatureTable:
    base: np.ndarray
    meta: np.ndarray
    column_provenance: list[MetaPathPair] = field(default_factory=list)

    @property
    def full(self) -> np.ndarray:
        if self.meta.shape[1] == 0:
            return self.base
        return np.hstack([self.base, self.meta])

    def duplicate_columns(self) -> list[tuple[int, int]]:
        """Pairs (k, k') of meta columns with byte-identical values, k < k'."""
        seen: dict[bytes, int] = {}
        dupes = []
        for k in range(self.meta.shape[1]):
            key = np.ascontiguousarray(self.meta[:, k]).tobytes()
            if key in seen:
                dupes.append((seen[key], k))
            else:
                seen[key] = k
        return dupes


def compute_all_features(
    paths: Sequence[DownsizedPath],
    pairs: Sequence[MetaPathPair],
    y: np.ndarray,
    *,
    prior: float,
    options: FeatureOptions | None = None,
    threads: int = 1,
) -> np.ndarray:
    """One column per pair, in pair order. ``y`` is treated as a read-only snapshot."""
    options = options or FeatureOptions()
    y = np.array(y, dtype=np.float64)
    y.flags.writeable = False
    n = paths[0].matrix.shape[0] if paths else len(y)
    Z = np.empty((n, len(pairs)))

    def column(k: int) -> None:
        pair = pairs[k]
        Z[:, k] = feature_fast(
            paths[pair.left], paths[pair.right], y, prior=prior, self_exclusion=options.self_exclusion
        )

    if threads <= 1 or len(pairs) < 2:
        for k in range(len(pairs)):
            column(k)
    else:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(column, range(len(pairs))))
    return Z
