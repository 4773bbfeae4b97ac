"""Weighted decision-tree and random-forest internals.

Trees are grown greedily on the gini criterion over weighted class counts.
Candidate thresholds are midpoints between consecutive distinct feature
values; ties between equally good splits resolve to the lowest feature
index, then the lowest threshold, so growth is fully deterministic. Feature
subsampling inside the kernel uses an explicit splitmix64 stream seeded per
tree, keeping results independent of numba/numpy RNG internals.

The jitted kernel writes a flat node representation: ``feature[i] == -1``
marks a leaf, whose weighted class counts are ``(w0[i], w1[i])``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

LEAF = -1
_MIN_GAIN = 1e-12


@njit(cache=True, inline="always")
def _splitmix64(state):
    s = (state[0] + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    state[0] = s
    z = s
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(
        0xFFFFFFFFFFFFFFFF
    )
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(
        0xFFFFFFFFFFFFFFFF
    )
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _grow_tree(X, y, w, rows, mtry, max_depth, rng_seed):
    """Grow one tree over the active ``rows`` (weights w[rows] > 0).

    Returns trimmed (feature, threshold, left, right, w0, w1) arrays.
    max_depth < 0 means unlimited.
    """
    d = X.shape[1]
    n_active = rows.shape[0]
    max_nodes = 2 * n_active + 1

    feature = np.full(max_nodes, LEAF, dtype=np.int32)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, -1, dtype=np.int32)
    right = np.full(max_nodes, -1, dtype=np.int32)
    node_w0 = np.zeros(max_nodes, dtype=np.float64)
    node_w1 = np.zeros(max_nodes, dtype=np.float64)

    idx = rows.copy()
    # stack rows: (start, end, depth, node_id)
    stack = np.empty((max_nodes, 4), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = n_active
    stack[0, 2] = 0
    stack[0, 3] = 0
    sp = 1
    n_nodes = 1

    rng_state = np.empty(1, dtype=np.uint64)
    rng_state[0] = np.uint64(rng_seed)

    pool = np.empty(d, dtype=np.int64)
    chosen = np.empty(d, dtype=np.int64)
    scratch = np.empty(n_active, dtype=np.int64)

    while sp > 0:
        sp -= 1
        start = stack[sp, 0]
        end = stack[sp, 1]
        depth = stack[sp, 2]
        node = stack[sp, 3]

        m = end - start
        w0 = 0.0
        w1 = 0.0
        for k in range(start, end):
            r = idx[k]
            if y[r] == 1:
                w1 += w[r]
            else:
                w0 += w[r]
        node_w0[node] = w0
        node_w1[node] = w1
        total = w0 + w1

        if w0 == 0.0 or w1 == 0.0 or m < 2 or (max_depth >= 0 and depth >= max_depth):
            continue  # leaf

        parent_impurity = total - (w0 * w0 + w1 * w1) / total

        # sample mtry features without replacement, then visit in ascending
        # order so strict-improvement comparison yields lowest-index ties
        for f in range(d):
            pool[f] = f
        k_feat = mtry if mtry < d else d
        for i in range(k_feat):
            z = _splitmix64(rng_state)
            j = i + int(z % np.uint64(d - i))
            tmp = pool[i]
            pool[i] = pool[j]
            pool[j] = tmp
            chosen[i] = pool[i]
        chosen_view = np.sort(chosen[:k_feat])

        best_gain = _MIN_GAIN
        best_feature = -1
        best_threshold = 0.0

        vals = np.empty(m, dtype=np.float64)
        for fi in range(k_feat):
            f = chosen_view[fi]
            for k in range(m):
                vals[k] = X[idx[start + k], f]
            order = np.argsort(vals, kind="mergesort")

            wl0 = 0.0
            wl1 = 0.0
            for k in range(m - 1):
                r = idx[start + order[k]]
                if y[r] == 1:
                    wl1 += w[r]
                else:
                    wl0 += w[r]
                v_here = vals[order[k]]
                v_next = vals[order[k + 1]]
                if v_next <= v_here:
                    continue
                wl = wl0 + wl1
                wr0 = w0 - wl0
                wr1 = w1 - wl1
                wr = wr0 + wr1
                if wl <= 0.0 or wr <= 0.0:
                    continue
                child_sum = (
                    wl
                    - (wl0 * wl0 + wl1 * wl1) / wl
                    + wr
                    - (wr0 * wr0 + wr1 * wr1) / wr
                )
                gain = parent_impurity - child_sum
                if gain > best_gain:
                    best_gain = gain
                    best_feature = f
                    best_threshold = 0.5 * (v_here + v_next)

        if best_feature < 0:
            continue  # no usable split among sampled features

        # stable partition: rows with value <= threshold first
        n_left = 0
        for k in range(start, end):
            if X[idx[k], best_feature] <= best_threshold:
                n_left += 1
        pl = 0
        pr = 0
        for k in range(start, end):
            r = idx[k]
            if X[r, best_feature] <= best_threshold:
                scratch[pl] = r
                pl += 1
            else:
                scratch[n_left + pr] = r
                pr += 1
        for k in range(m):
            idx[start + k] = scratch[k]

        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        feature[node] = best_feature
        threshold[node] = best_threshold
        left[node] = left_id
        right[node] = right_id

        # push right then left: left child is processed (and numbered) first
        stack[sp, 0] = start + n_left
        stack[sp, 1] = end
        stack[sp, 2] = depth + 1
        stack[sp, 3] = right_id
        sp += 1
        stack[sp, 0] = start
        stack[sp, 1] = start + n_left
        stack[sp, 2] = depth + 1
        stack[sp, 3] = left_id
        sp += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        node_w0[:n_nodes].copy(),
        node_w1[:n_nodes].copy(),
    )


@njit(cache=True)
def _accumulate_scores(feature, threshold, left, right, w0, w1, X, out):
    for i in range(X.shape[0]):
        node = 0
        while feature[node] != LEAF:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] += w1[node] / (w0[node] + w1[node])


class Tree:
    """Flat-array decision tree with weighted leaf class counts."""

    __slots__ = ("feature", "threshold", "left", "right", "w0", "w1")

    def __init__(self, feature, threshold, left, right, w0, w1):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.w0 = np.asarray(w0, dtype=np.float64)
        self.w1 = np.asarray(w1, dtype=np.float64)

    @property
    def n_nodes(self):
        return self.feature.shape[0]

    def scores(self, X):
        out = np.zeros(X.shape[0], dtype=np.float64)
        _accumulate_scores(
            self.feature, self.threshold, self.left, self.right, self.w0, self.w1,
            np.ascontiguousarray(X, dtype=np.float64), out,
        )
        return out

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "w0": self.w0.tolist(),
            "w1": self.w1.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["feature"], d["threshold"], d["left"], d["right"], d["w0"], d["w1"])


def fit_tree(X, y, weights, mtry, max_depth, rng_seed):
    """Fit one tree. Rows with zero weight are excluded from growth."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)
    w = np.ascontiguousarray(weights, dtype=np.float64)
    rows = np.flatnonzero(w > 0.0).astype(np.int64)
    depth = -1 if max_depth is None else int(max_depth)
    parts = _grow_tree(X, y, w, rows, int(mtry), depth, np.uint64(rng_seed))
    return Tree(*parts)


def fit_forest(X, y, weights, n_estimators, mtry, max_depth, seed):
    """Fit a forest of trees on weighted bootstrap resamples.

    Each tree draws n row indices with replacement with probability
    proportional to the weights (an explicit uniform vector when weights are
    uniform, so weighted and unweighted calls share the RNG path), then grows
    on the resample counts. Per-tree seeds derive from (seed, tree index).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    p = np.asarray(weights, dtype=np.float64)
    p = p / p.sum()
    trees = []
    for t in range(n_estimators):
        rng = np.random.default_rng([int(seed), t])
        draw = rng.choice(n, size=n, replace=True, p=p)
        counts = np.bincount(draw, minlength=n).astype(np.float64)
        kernel_seed = int(rng.integers(0, 2**63 - 1))
        trees.append(fit_tree(X, y, counts, mtry, max_depth, kernel_seed))
    return trees


def forest_scores(trees, X):
    """Mean over trees of the leaf positive-class frequency."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    out = np.zeros(X.shape[0], dtype=np.float64)
    for tree in trees:
        _accumulate_scores(
            tree.feature, tree.threshold, tree.left, tree.right, tree.w0, tree.w1, X, out
        )
    return out / len(trees)


def traverse_single(tree, x):
    """Pure-Python single-row traversal (reference path for tests)."""
    node = 0
    while tree.feature[node] != LEAF:
        if x[tree.feature[node]] <= tree.threshold[node]:
            node = tree.left[node]
        else:
            node = tree.right[node]
    return tree.w1[node] / (tree.w0[node] + tree.w1[node])


def default_mtry(n_features, mode):
    if mode == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    return n_features
