"""Time the decomposed feature computation against the materialized meta-path route."""

from __future__ import annotations

import hashlib
import math
import statistics
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import fmt, write_csv
from .features import DEFAULT_ORACLE_CAP, PeakTracker, feature_dense_oracle, feature_fast
from .metapath import DownsizedPath, MetaPathPair

MODES = ("dense", "decomposed")


@dataclass(frozen=True)
class BenchRow:
    pair_id: int
    semantics: str
    mode: str
    ms: float
    peak_nnz: int
    checksum: str


def checksum(z: np.ndarray, digits: int = 9) -> str:
    """Hash of ``z`` rounded to ``digits`` decimals; robust to last-bit float noise."""
    rounded = np.round(np.asarray(z, dtype=np.float64), digits) + 0.0  # fold -0.0 into 0.0
    return hashlib.sha256(rounded.tobytes()).hexdigest()[:16]


def benchmark_pair(
    paths: Sequence[DownsizedPath],
    pair: MetaPathPair,
    mode: str,
    y: np.ndarray,
    *,
    prior: float,
    self_exclusion: bool = True,
    repeats: int = 5,
    warmup: int = 1,
    cap: int | None = DEFAULT_ORACLE_CAP,
    pair_id: int = 0,
) -> BenchRow:
    """Median wall time over ``repeats`` runs after ``warmup`` untimed ones."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    P1, P2 = paths[pair.left], paths[pair.right]

    def once(tracker=None):
        if mode == "dense":
            return feature_dense_oracle(P1, P2, y, prior=prior, self_exclusion=self_exclusion, cap=cap, tracker=tracker)
        return feature_fast(P1, P2, y, prior=prior, self_exclusion=self_exclusion, tracker=tracker)

    tracker = PeakTracker()
    z = once(tracker)
    for _ in range(max(warmup - 1, 0)):
        once()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        once()
        times.append((time.perf_counter() - t0) * 1e3)
    return BenchRow(pair_id, pair.semantics_label, mode, statistics.median(times), tracker.peak, checksum(z))


def find_pair(paths: Sequence[DownsizedPath], pairs: Sequence[MetaPathPair], end_type: str) -> int:
    """Index of the pair whose two sides are both the one-hop path to ``end_type``."""
    for k, p in enumerate(pairs):
        if p.left == p.right and paths[p.left].trace.end_type == end_type and len(paths[p.left].trace.links) == 1:
            return k
    raise KeyError(f"no one-hop pair ending at {end_type!r}")


def write_report(path, rows: Sequence[BenchRow]) -> None:
    write_csv(
        path,
        ["pair_id", "semantics", "mode", "ms", "log10_ms", "peak_nnz", "checksum"],
        (
            (r.pair_id, r.semantics, r.mode, fmt(r.ms, 6), fmt(math.log10(max(r.ms, 1e-6)), 4), r.peak_nnz, r.checksum)
            for r in rows
        ),
    )
