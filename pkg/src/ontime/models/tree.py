"""CART trees stored as flat arrays, grown by a numba kernel.

Splits send ``x < threshold`` left.  Candidate thresholds are midpoints
between consecutive distinct sorted values.  Among candidates whose impurity
decrease ties within a small relative tolerance, the lower column index wins,
then the lower threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

GINI = 0
SSE = 1
TIE_RTOL = 1e-10


def gini_impurity(pos: int, neg: int) -> float:
    total = pos + neg
    if total < 1:
        raise ValueError("gini impurity of an empty node is undefined")
    p = pos / total
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


@njit(cache=True)
def _node_impurity(criterion, s, s2, n):
    # both are totals over the node (n-weighted)
    if n == 0:
        return 0.0
    if criterion == GINI:
        neg = n - s
        return n - (s * s + neg * neg) / n
    v = s2 - s * s / n
    return v if v > 0.0 else 0.0


@njit(cache=True)
def _next_u64(state):
    state[0] = state[0] + np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def _grow(X, y, idx, binary, criterion, max_depth, min_split, min_leaf, cp, mtry, seed):
    n_total = idx.shape[0]
    p = X.shape[1]
    cap = 2 * n_total + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros(cap)
    count = np.zeros(cap, np.int64)

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    sp = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n_total
    st_depth[0] = 0
    sp = 1
    n_nodes = 1

    state = np.empty(1, np.uint64)
    state[0] = np.uint64(seed)
    cols = np.arange(p)
    xs = np.empty(n_total)
    buf = np.empty(n_total, np.int64)

    s_root = 0.0
    s2_root = 0.0
    for k in range(n_total):
        yk = y[idx[k]]
        s_root += yk
        s2_root += yk * yk
    root_imp = _node_impurity(criterion, s_root, s2_root, n_total)

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        s = st_start[sp]
        e = st_end[sp]
        d = st_depth[sp]
        m = e - s
        S = 0.0
        S2 = 0.0
        for k in range(s, e):
            yk = y[idx[k]]
            S += yk
            S2 += yk * yk
        node_imp = _node_impurity(criterion, S, S2, m)
        value[node] = S / m
        count[node] = m
        if d >= max_depth or m < min_split or m < 2 * min_leaf or node_imp <= 1e-14 * m:
            continue

        n_cand = p
        if mtry < p:
            for k in range(mtry):
                r = k + np.int64(_next_u64(state) % np.uint64(p - k))
                tmp = cols[k]
                cols[k] = cols[r]
                cols[r] = tmp
            n_cand = mtry
        cand = np.sort(cols[:n_cand].copy())

        tol = TIE_RTOL * node_imp
        best_dec = 0.0
        best_f = -1
        best_t = 0.0
        for ci in range(n_cand):
            f = cand[ci]
            if binary[f]:
                # 0/1 column: the only candidate threshold is 0.5
                nl = 0
                sl = 0.0
                s2l = 0.0
                for k in range(s, e):
                    if X[idx[k], f] < 0.5:
                        yk = y[idx[k]]
                        nl += 1
                        sl += yk
                        s2l += yk * yk
                nr = m - nl
                if nl < min_leaf or nr < min_leaf or nl == 0 or nr == 0:
                    continue
                dec = node_imp - _node_impurity(criterion, sl, s2l, nl) \
                    - _node_impurity(criterion, S - sl, S2 - s2l, nr)
                if dec > best_dec + tol:
                    best_dec = dec
                    best_f = f
                    best_t = 0.5
                continue
            for k in range(m):
                xs[k] = X[idx[s + k], f]
            order = np.argsort(xs[:m], kind="mergesort")
            if xs[order[0]] == xs[order[m - 1]]:
                continue
            sl = 0.0
            s2l = 0.0
            for k in range(m - 1):
                yk = y[idx[s + order[k]]]
                sl += yk
                s2l += yk * yk
                nl = k + 1
                nr = m - nl
                if nr < min_leaf:
                    break
                if nl < min_leaf:
                    continue
                a = xs[order[k]]
                b = xs[order[k + 1]]
                if not a < b:
                    continue
                dec = node_imp - _node_impurity(criterion, sl, s2l, nl) \
                    - _node_impurity(criterion, S - sl, S2 - s2l, nr)
                if dec > best_dec + tol:
                    best_dec = dec
                    best_f = f
                    t = 0.5 * (a + b)
                    if not t > a:
                        t = b
                    best_t = t
        if best_f < 0 or best_dec <= tol or best_dec < cp * root_imp:
            continue

        nl = 0
        for k in range(s, e):
            if X[idx[k], best_f] < best_t:
                buf[nl] = idx[k]
                nl += 1
        nr = 0
        for k in range(s, e):
            if not X[idx[k], best_f] < best_t:
                buf[nl + nr] = idx[k]
                nr += 1
        for k in range(m):
            idx[s + k] = buf[k]

        feature[node] = best_f
        threshold[node] = best_t
        left[node] = n_nodes
        right[node] = n_nodes + 1
        # right pushed first so the left subtree is numbered (and grown) first
        st_node[sp] = n_nodes + 1
        st_start[sp] = s + nl
        st_end[sp] = e
        st_depth[sp] = d + 1
        sp += 1
        st_node[sp] = n_nodes
        st_start[sp] = s
        st_end[sp] = s + nl
        st_depth[sp] = d + 1
        sp += 1
        n_nodes += 2

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), count[:n_nodes].copy())


@njit(cache=True, nogil=True)
def _apply(feature, threshold, left, right, X):
    out = np.empty(X.shape[0], np.int64)
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] < threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat binary tree; ``feature[k] == -1`` marks a leaf.

    Leaves carry ``value`` (positive fraction for classification trees,
    additive score for boosting trees) and the training count ``n``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _apply(self.feature, self.threshold, self.left, self.right, X)

    def predict_value(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def with_values(self, value: np.ndarray) -> "Tree":
        return Tree(self.feature, self.threshold, self.left, self.right,
                    np.asarray(value, dtype=np.float64), self.n)

    def to_nested(self, node: int = 0) -> dict:
        """Recursive ``{"leaf": ...}`` / ``{"split": ...}`` view, handy for tests."""
        if self.feature[node] < 0:
            return {"leaf": float(self.value[node]), "n": int(self.n[node])}
        return {
            "split": (int(self.feature[node]), float(self.threshold[node])),
            "left": self.to_nested(int(self.left[node])),
            "right": self.to_nested(int(self.right[node])),
        }

    def to_json(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n": self.n.tolist(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Tree":
        return cls(
            np.asarray(doc["feature"], dtype=np.int64),
            np.asarray(doc["threshold"], dtype=np.float64),
            np.asarray(doc["left"], dtype=np.int64),
            np.asarray(doc["right"], dtype=np.int64),
            np.asarray(doc["value"], dtype=np.float64),
            np.asarray(doc["n"], dtype=np.int64),
        )


def grow_tree(X, y, rows=None, *, criterion=GINI, max_depth=30, min_split=20, min_leaf=7,
              cp=0.01, mtry=None, seed=0) -> Tree:
    """Grow one tree on ``X[rows]`` (``rows`` may repeat, as in a bootstrap)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    idx = np.arange(len(y), dtype=np.int64) if rows is None else np.array(rows, dtype=np.int64)
    if len(idx) == 0:
        raise ValueError("cannot grow a tree on zero rows")
    p = X.shape[1]
    mtry = p if mtry is None else int(min(max(mtry, 1), p))
    binary = np.all((X == 0.0) | (X == 1.0), axis=0)
    parts = _grow(X, y, idx, binary, int(criterion), int(max_depth), int(min_split), int(min_leaf),
                  float(cp), mtry, np.uint64(int(seed) & ((1 << 64) - 1)))
    return Tree(*parts)
