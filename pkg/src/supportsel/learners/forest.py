"""Random forest of CART trees: Gini splits, bootstrap sampling, ceil(sqrt(d))
features per split.

Tree growth is the hot loop of the whole pipeline (tens of thousands of trees
in a full grid run), so it is compiled with numba. Nodes live in flat arrays:
``feature[i] < 0`` marks node i as a leaf carrying ``label[i]``; internal
nodes route queries left when ``x[feature] < threshold``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

_NO_DEPTH_LIMIT = np.iinfo(np.int32).max


@njit(cache=True)
def _grow_tree(X, y, sample_idx, n_feats, max_depth, seed):
    n = sample_idx.shape[0]
    d = X.shape[1]
    max_nodes = 2 * n + 1

    feature = np.full(max_nodes, -1, dtype=np.int32)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, -1, dtype=np.int32)
    right = np.full(max_nodes, -1, dtype=np.int32)
    label = np.zeros(max_nodes, dtype=np.int8)

    np.random.seed(seed)
    idx = sample_idx.copy()
    buf = np.empty(n, dtype=np.int64)

    # Work stack of (node, start, stop, depth) over idx slices.
    stack = np.empty((max_nodes, 4), dtype=np.int64)
    stack[0] = (0, 0, n, 0)
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node, a, b, depth = stack[top]
        m = b - a
        pos = 0
        for i in range(a, b):
            pos += y[idx[i]]
        label[node] = np.int8(1) if 2 * pos > m else np.int8(0)
        if pos == 0 or pos == m or m < 2 or depth >= max_depth:
            continue

        # Scan features in random order; keep going past n_feats until at
        # least one valid (both-sides-nonempty) split has been seen, so a
        # node only becomes an impure leaf when every feature is constant.
        perm = np.random.permutation(d)
        best_cost = np.inf
        best_feat = -1
        best_thr = 0.0
        examined = 0
        for fi in range(d):
            if examined >= n_feats and best_feat >= 0:
                break
            f = perm[fi]
            values = np.empty(m, dtype=np.float64)
            for i in range(m):
                values[i] = X[idx[a + i], f]
            order = np.argsort(values)
            if values[order[0]] == values[order[m - 1]]:
                continue  # constant feature: does not count as examined
            examined += 1
            left_pos = 0
            total_pos = pos
            for i in range(m - 1):
                left_pos += y[idx[a + order[i]]]
                v_lo = values[order[i]]
                v_hi = values[order[i + 1]]
                if v_lo == v_hi:
                    continue
                m_l = i + 1
                m_r = m - m_l
                pos_l = left_pos
                pos_r = total_pos - left_pos
                cost = (pos_l * (m_l - pos_l)) / m_l + (pos_r * (m_r - pos_r)) / m_r
                if cost < best_cost:
                    best_cost = cost
                    best_feat = f
                    best_thr = 0.5 * (v_lo + v_hi)
        if best_feat < 0:
            continue  # every feature constant on this node: majority leaf

        # Stable partition of idx[a:b]: x[best_feat] < best_thr goes left.
        n_l = 0
        n_r = 0
        for i in range(a, b):
            if X[idx[i], best_feat] < best_thr:
                idx[a + n_l] = idx[i]
                n_l += 1
            else:
                buf[n_r] = idx[i]
                n_r += 1
        for i in range(n_r):
            idx[a + n_l + i] = buf[i]

        child_l = n_nodes
        child_r = n_nodes + 1
        n_nodes += 2
        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = child_l
        right[node] = child_r
        stack[top] = (child_l, a, a + n_l, depth + 1)
        stack[top + 1] = (child_r, a + n_l, b, depth + 1)
        top += 2

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], label[:n_nodes]


@njit(cache=True)
def _predict_tree(feature, threshold, left, right, label, X):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] < threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = label[node]
    return out


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    label: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        return _predict_tree(self.feature, self.threshold, self.left, self.right,
                             self.label, X)


@dataclass
class ForestState:
    trees: list[Tree]

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def fit_forest(X: np.ndarray, y: np.ndarray, n_estimators: int,
               max_depth: int | None, seed: int) -> ForestState:
    """Bootstrap-sample and grow ``n_estimators`` trees, all seeded from ``seed``."""
    n, d = X.shape
    n_feats = int(np.ceil(np.sqrt(d)))
    depth_cap = _NO_DEPTH_LIMIT if max_depth is None else max_depth
    rng = np.random.Generator(np.random.PCG64(seed))
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int8)
    trees = []
    for _ in range(n_estimators):
        boot = rng.integers(0, n, size=n, dtype=np.int64)
        tree_seed = int(rng.integers(0, 2**31 - 1))
        trees.append(Tree(*_grow_tree(X, y, boot, n_feats, depth_cap, tree_seed)))
    return ForestState(trees)


def forest_vote_fraction(state: ForestState, X: np.ndarray) -> np.ndarray:
    """Fraction of trees voting 1 for each row of X."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    votes = np.zeros(X.shape[0], dtype=np.int64)
    for tree in state.trees:
        votes += tree.predict(X)
    return votes / state.n_trees


def forest_to_dict(state: ForestState) -> dict:
    return {
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "label": t.label.tolist(),
            }
            for t in state.trees
        ]
    }


def forest_from_dict(payload: dict) -> ForestState:
    trees = [
        Tree(
            feature=np.asarray(t["feature"], dtype=np.int32),
            threshold=np.asarray(t["threshold"], dtype=np.float64),
            left=np.asarray(t["left"], dtype=np.int32),
            right=np.asarray(t["right"], dtype=np.int32),
            label=np.asarray(t["label"], dtype=np.int8),
        )
        for t in payload["trees"]
    ]
    return ForestState(trees)
