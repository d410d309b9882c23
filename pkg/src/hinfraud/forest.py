"""Bagged Gini decision trees grown level by level on quantile-binned features.

Each level computes, for every open node at once, a (node, feature, bin)
histogram of sample weight and fraud weight with one ``bincount``. The best
threshold per node is read off the cumulative sums. Bootstrap resampling is
expressed as integer sample weights, so the training matrix is never copied.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray  # go left iff x <= threshold; unused (0) at leaves
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # weighted fraud fraction at the node

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return node
            r, nd, ff = rows[inner], node[inner], f[inner]
            go_left = X[r, ff] <= self.threshold[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": [float(v) for v in self.value],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64),
        )


def bin_edges(X: np.ndarray, n_bins: int) -> list[np.ndarray]:
    """Candidate thresholds per feature: midpoints of unique values, or quantiles if too many."""
    edges = []
    for col in X.T:
        u = np.unique(col)
        if len(u) <= n_bins:
            e = (u[:-1] + u[1:]) / 2.0
        else:
            e = np.unique(np.quantile(col, np.linspace(0.0, 1.0, n_bins + 1)[1:-1]))
            e = e[e < u[-1]]
        edges.append(e)
    return edges


def bin_matrix(X: np.ndarray, edges: list[np.ndarray]) -> np.ndarray:
    # bin b holds values in (edges[b-1], edges[b]], so bin <= b  <=>  x <= edges[b]
    return np.stack([np.searchsorted(e, X[:, f], side="left") for f, e in enumerate(edges)], axis=1).astype(np.int64)


def _weighted_gini(total: np.ndarray, pos: np.ndarray) -> np.ndarray:
    """Gini impurity times node weight: 2 p (1 - p) W."""
    out = np.zeros_like(total)
    np.divide(2.0 * pos * (total - pos), total, out=out, where=total > 0)
    return out


def grow_tree(
    Xb: np.ndarray,
    edges: list[np.ndarray],
    y: np.ndarray,
    w: np.ndarray,
    *,
    max_depth: int,
    max_features: int,
    min_samples_leaf: int,
    rng: np.random.Generator,
) -> Tree:
    n_feat = Xb.shape[1]
    n_bins = max(len(e) for e in edges) + 1 if edges else 1
    n_edges = np.array([len(e) for e in edges])
    # bin b is a usable split point for feature f iff b < n_edges[f]
    usable = np.arange(n_bins - 1)[None, :] < n_edges[:, None]

    feature, threshold, left, right, value = [-1], [0.0], [-1], [-1], [0.0]
    idx = np.flatnonzero(w > 0)
    sw, sy = w[idx], w[idx] * y[idx]
    Xi = Xb[idx]
    local = np.zeros(len(idx), dtype=np.int64)
    frontier = np.array([0])

    for depth in range(max_depth + 1):
        A = len(frontier)
        tot = np.bincount(local, weights=sw, minlength=A)
        pos = np.bincount(local, weights=sy, minlength=A)
        cnt = np.bincount(local, minlength=A)
        for a, node in enumerate(frontier):
            value[node] = pos[a] / tot[a] if tot[a] > 0 else 0.0
        if depth == max_depth:
            break
        open_ = (cnt >= 2 * min_samples_leaf) & (pos > 0) & (pos < tot)
        if not open_.any() or n_bins < 2:
            break
        # relabel open nodes 0..K-1 and drop samples sitting in closed nodes
        remap = np.full(A, -1)
        remap[open_] = np.arange(int(open_.sum()))
        keep = remap[local] >= 0
        lk, Xk, wk, yk = remap[local[keep]], Xi[keep], sw[keep], sy[keep]
        K = int(open_.sum())

        # histograms only over each node's sampled feature subset
        if max_features < n_feat:
            cand = np.argsort(rng.random((K, n_feat)), axis=1)[:, :max_features]
        else:
            cand = np.broadcast_to(np.arange(n_feat), (K, n_feat))
        m = cand.shape[1]
        Xs = np.take_along_axis(Xk, cand[lk], axis=1)
        keys = ((lk[:, None] * m + np.arange(m)[None, :]) * n_bins + Xs).ravel()
        size = K * m * n_bins
        hw = np.bincount(keys, weights=np.repeat(wk, m), minlength=size).reshape(K, m, n_bins)
        hp = np.bincount(keys, weights=np.repeat(yk, m), minlength=size).reshape(K, m, n_bins)
        hc = np.bincount(keys, minlength=size).reshape(K, m, n_bins)
        lw = np.cumsum(hw, axis=2)[:, :, :-1]
        lp = np.cumsum(hp, axis=2)[:, :, :-1]
        lc = np.cumsum(hc, axis=2)[:, :, :-1]
        ptot, ppos, pcnt = tot[open_], pos[open_], cnt[open_]
        rw = ptot[:, None, None] - lw
        rp = ppos[:, None, None] - lp
        rc = pcnt[:, None, None] - lc
        imp = _weighted_gini(lw, lp) + _weighted_gini(rw, rp)
        valid = (lc >= min_samples_leaf) & (rc >= min_samples_leaf) & usable[cand]
        imp = np.where(valid, imp, np.inf).reshape(K, -1)
        best = np.argmin(imp, axis=1)
        best_imp = imp[np.arange(K), best]
        parent_imp = _weighted_gini(ptot, ppos)
        do_split = np.isfinite(best_imp) & (best_imp < parent_imp - 1e-12 * np.maximum(ptot, 1.0))
        if not do_split.any():
            break

        best_j, best_b = np.divmod(best, n_bins - 1)
        best_f = cand[np.arange(K), best_j]
        open_nodes = frontier[open_]
        child_left = np.full(K, -1)
        child_right = np.full(K, -1)
        next_frontier = []
        for k in np.flatnonzero(do_split):
            node = open_nodes[k]
            f, b = int(best_f[k]), int(best_b[k])
            feature[node] = f
            threshold[node] = float(edges[f][b])
            for side in (child_left, child_right):
                side[k] = len(feature)
                next_frontier.append(len(feature))
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                value.append(0.0)
            left[node], right[node] = int(child_left[k]), int(child_right[k])

        # route samples of split nodes to their children; others are finished
        ks = lk
        moving = do_split[ks]
        kk = ks[moving]
        goes_left = Xk[moving, best_f[kk]] <= best_b[kk]
        child = np.where(goes_left, child_left[kk], child_right[kk])
        frontier = np.array(next_frontier)
        pos_in_frontier = np.full(len(feature), -1)
        pos_in_frontier[frontier] = np.arange(len(frontier))
        local = pos_in_frontier[child]
        Xi, sw, sy = Xk[moving], wk[moving], yk[moving]

    return Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=np.float64),
    )


def resolve_max_features(max_features, n_feat: int) -> int:
    if n_feat == 0:
        return 0
    if max_features in (None, "all"):
        k = n_feat
    elif max_features == "sqrt":
        k = int(np.sqrt(n_feat))
    elif max_features == "log2":
        k = int(np.log2(n_feat))
    elif isinstance(max_features, float):
        k = int(round(max_features * n_feat))
    else:
        k = int(max_features)
    return min(max(k, 1), n_feat)


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    sample_weight: np.ndarray,
    *,
    n_trees: int,
    max_depth: int,
    max_features,
    min_samples_leaf: int,
    n_bins: int,
    bootstrap: bool,
    seed: int,
    threads: int = 1,
) -> list[Tree]:
    n, d = X.shape
    edges = bin_edges(X, n_bins)
    Xb = bin_matrix(X, edges)
    k = resolve_max_features(max_features, d)
    seeds = np.random.SeedSequence(seed).spawn(n_trees)

    def one(ss: np.random.SeedSequence) -> Tree:
        rng = np.random.default_rng(ss)
        if bootstrap:
            mult = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
        else:
            mult = np.ones(n)
        return grow_tree(
            Xb, edges, y, mult * sample_weight,
            max_depth=max_depth, max_features=k, min_samples_leaf=min_samples_leaf, rng=rng,
        )

    if threads <= 1:
        return [one(s) for s in seeds]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(one, seeds))
