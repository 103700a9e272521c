"""Compiled CART growing and traversal.

Trees are stored as flat arrays indexed by node id: ``feature[i] == -1``
marks a leaf; internal nodes send ``x[feature] <= threshold`` to ``left``.
``value`` holds the weighted class counts that reached each node.
"""
import numpy as np
from numba import njit

GINI, ENTROPY = 0, 1


@njit(cache=True, nogil=True)
def _split_score(counts, left_counts, wl, total, criterion):
    # Weighted impurity wl * I(left) + wr * I(right); lower is better.
    wr = total - wl
    if criterion == GINI:
        sl = 0.0
        sr = 0.0
        for c in range(counts.shape[0]):
            cl = left_counts[c]
            cr = counts[c] - cl
            sl += cl * cl
            sr += cr * cr
        return (wl - sl / wl) + (wr - sr / wr)
    h = 0.0
    for c in range(counts.shape[0]):
        cl = left_counts[c]
        cr = counts[c] - cl
        if cl > 0.0:
            h -= cl * np.log(cl / wl)
        if cr > 0.0:
            h -= cr * np.log(cr / wr)
    return h


@njit(cache=True, nogil=True)
def build_tree(X, y, w, n_classes, max_depth, min_samples_split, max_features, criterion, seed):
    """Grow one tree depth-first.

    Rows with zero weight must be removed by the caller. ``max_depth < 0``
    means unlimited. Equal-score candidate splits resolve to the lowest
    feature index, then the lowest threshold.
    """
    np.random.seed(seed)
    n, d = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros((cap, n_classes))

    idx = np.arange(n)
    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    st_node[0], st_start[0], st_end[0], st_depth[0] = 0, 0, n, 0
    top = 1
    n_nodes = 1

    pool = np.arange(d)
    cand = np.empty(d, dtype=np.int64)
    left_counts = np.zeros(n_classes)
    counts = np.zeros(n_classes)
    k = min(max_features, d)

    while top > 0:
        top -= 1
        node, start, end, depth = st_node[top], st_start[top], st_end[top], st_depth[top]

        counts[:] = 0.0
        for i in range(start, end):
            counts[y[idx[i]]] += w[idx[i]]
        value[node] = counts
        total = counts.sum()

        nonzero = 0
        for c in counts:
            if c > 0.0:
                nonzero += 1
        n_node = end - start
        if nonzero <= 1 or n_node < min_samples_split or (max_depth >= 0 and depth >= max_depth):
            continue

        if k < d:
            for i in range(k):
                j = np.random.randint(i, d)
                pool[i], pool[j] = pool[j], pool[i]
            cand[:k] = np.sort(pool[:k])
        else:
            cand[:k] = np.arange(d)

        eps = 1e-12 * total
        best_score = np.inf
        best_f = -1
        best_thr = 0.0
        vals = np.empty(n_node)
        for ci in range(k):
            f = cand[ci]
            for i in range(n_node):
                vals[i] = X[idx[start + i], f]
            order = np.argsort(vals, kind="mergesort")
            left_counts[:] = 0.0
            wl = 0.0
            for i in range(n_node - 1):
                r = idx[start + order[i]]
                left_counts[y[r]] += w[r]
                wl += w[r]
                v_i = vals[order[i]]
                v_next = vals[order[i + 1]]
                if v_next <= v_i:
                    continue
                score = _split_score(counts, left_counts, wl, total, criterion)
                if score < best_score - eps:
                    best_score = score
                    best_f = f
                    thr = 0.5 * (v_i + v_next)
                    if thr >= v_next:
                        thr = v_i
                    best_thr = thr

        if best_f < 0:
            continue

        # partition idx[start:end] in place, keeping relative order on each side
        lo = start
        buf = np.empty(n_node, dtype=np.int64)
        nb = 0
        for i in range(start, end):
            r = idx[i]
            if X[r, best_f] <= best_thr:
                idx[lo] = r
                lo += 1
            else:
                buf[nb] = r
                nb += 1
        for i in range(nb):
            idx[lo + i] = buf[i]

        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        n_nodes += 2
        # push right first so the left subtree is grown first
        st_node[top], st_start[top], st_end[top], st_depth[top] = right[node], lo, end, depth + 1
        top += 1
        st_node[top], st_start[top], st_end[top], st_depth[top] = left[node], start, lo, depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def apply_tree(X, feature, threshold, left, right):
    """Leaf index reached by every row of ``X``."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out
