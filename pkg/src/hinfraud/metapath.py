"""Downsized meta-path enumeration, materialization and pairing.

A downsized path starts at the transaction type and only steps to node types
with strictly fewer nodes. Every transaction-to-transaction meta-path used
for features is a pair of downsized paths joined at their shared end type.
"""

from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .hin import Hin, HinSchema, inverse_name


@dataclass(frozen=True)
class PathTrace:
    node_types: tuple[str, ...]
    links: tuple[str, ...] = ()

    @property
    def end_type(self) -> str:
        return self.node_types[-1]

    @property
    def is_trivial(self) -> bool:
        return not self.links

    def __str__(self) -> str:
        parts = [self.node_types[0]]
        for link, node in zip(self.links, self.node_types[1:]):
            parts += [link, node]
        return "→".join(parts)


@dataclass(frozen=True)
class DownsizedPath:
    trace: PathTrace
    matrix: sp.csr_matrix
    is_simple: bool

    @property
    def nnz(self) -> int:
        return int(self.matrix.nnz)


@dataclass(frozen=True)
class MetaPathPair:
    left: int
    right: int
    end_type: str
    semantics_label: str


def enumerate_downsized(schema: HinSchema, node_counts: Mapping[str, int]) -> list[PathTrace]:
    """Breadth-first search from the transaction type over links and their inverses.

    A link is followed only if its target type has strictly fewer nodes than
    its source type. Index 0 is the trivial trace.
    """
    start = schema.target_type
    traces = [PathTrace((start,))]
    links = schema.all_links()
    queue = deque([traces[0]])
    while queue:
        cur = queue.popleft()
        for lt in links:
            if lt.source == cur.end_type and node_counts[lt.source] > node_counts[lt.target]:
                nxt = PathTrace(cur.node_types + (lt.target,), cur.links + (lt.name,))
                traces.append(nxt)
                queue.append(nxt)
    return traces


def materialize(hin: Hin, trace: PathTrace) -> DownsizedPath:
    n = hin.n
    if trace.is_trivial:
        return DownsizedPath(trace, sp.identity(n, dtype=np.float64, format="csr"), True)
    mat = hin.adjacency(trace.links[0])
    for link in trace.links[1:]:
        mat = mat @ hin.adjacency(link)
    mat = sp.csr_matrix(mat)
    mat.sort_indices()
    simple = all(hin.schema.link(k).cardinality.is_to_one for k in trace.links)
    return DownsizedPath(trace, mat, simple)


def materialize_all(hin: Hin, traces: Sequence[PathTrace], threads: int = 1) -> list[DownsizedPath]:
    if threads <= 1:
        return [materialize(hin, t) for t in traces]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(lambda t: materialize(hin, t), traces))


def downsized_paths(hin: Hin, threads: int = 1) -> list[DownsizedPath]:
    return materialize_all(hin, enumerate_downsized(hin.schema, hin.node_counts), threads)


def render_semantics(left: PathTrace, right: PathTrace) -> str:
    """``left`` forwards, then ``right`` walked back with inverted links."""
    parts = [str(left)]
    for link, node in zip(reversed(right.links), reversed(right.node_types[:-1])):
        parts += [inverse_name(link), node]
    return "→".join(parts)


def pair_paths(paths: Sequence[DownsizedPath]) -> list[MetaPathPair]:
    """All ordered pairs (i, j) sharing an end type, except (0, 0)."""
    pairs = []
    for i, p1 in enumerate(paths):
        for j, p2 in enumerate(paths):
            if i == 0 and j == 0:
                continue
            if p1.trace.end_type == p2.trace.end_type:
                pairs.append(MetaPathPair(i, j, p1.trace.end_type, render_semantics(p1.trace, p2.trace)))
    return pairs


def meta_path_links(left: PathTrace, right: PathTrace) -> tuple[str, ...]:
    """Full link sequence of the joined meta-path."""
    return left.links + tuple(inverse_name(k) for k in reversed(right.links))
