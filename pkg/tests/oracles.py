"""Independent reference computations used by the unit and acceptance tests."""

from itertools import combinations_with_replacement

import numpy as np

# row types over three binary features and a binary label: bits (x0, x1, x2, y)
ROW_TYPES = np.array([[(t >> 3) & 1, (t >> 2) & 1, (t >> 1) & 1, t & 1] for t in range(16)])


def enumerate_multisets(max_rows=8, min_rows=2):
    """Count matrix of every multiset of row types with ``min_rows..max_rows`` rows."""
    out = []
    for k in range(min_rows, max_rows + 1):
        for combo in combinations_with_replacement(range(16), k):
            out.append(np.bincount(combo, minlength=16))
    return np.array(out, dtype=np.int64)


def rows_from_counts(counts):
    idx = np.repeat(np.arange(16), counts)
    X = ROW_TYPES[idx, :3].astype(float)
    y = ROW_TYPES[idx, 3].astype(np.int64)
    return X, y


def _gini(c0, c1):
    n = c0 + c1
    safe = np.where(n > 0, n, 1)
    return np.where(n > 0, 1.0 - (c0 / safe) ** 2 - (c1 / safe) ** 2, 0.0)


def brute_force_gini_splits(counts, tol=1e-12):
    """Exhaustive best split for every dataset of binary features.

    Each feature admits exactly one split (value 0 left, value 1 right).
    Returns ``(feature, weighted)`` arrays; ``feature == -1`` means no split
    improves on the parent impurity.
    """
    counts = np.asarray(counts, dtype=float)
    n = counts.sum(axis=1)
    y1 = ROW_TYPES[:, 3] == 1
    parent = _gini(counts[:, ~y1].sum(axis=1), counts[:, y1].sum(axis=1))
    weighted = np.full((counts.shape[0], 3), np.inf)
    for j in range(3):
        left = ROW_TYPES[:, j] == 0
        l0 = counts[:, left & ~y1].sum(axis=1)
        l1 = counts[:, left & y1].sum(axis=1)
        r0 = counts[:, ~left & ~y1].sum(axis=1)
        r1 = counts[:, ~left & y1].sum(axis=1)
        nl, nr = l0 + l1, r0 + r1
        w = (nl * _gini(l0, l1) + nr * _gini(r0, r1)) / n
        weighted[:, j] = np.where((nl > 0) & (nr > 0), w, np.inf)
    best = weighted.min(axis=1)
    # lowest feature index among ties
    feature = np.argmax(weighted <= best[:, None] + tol, axis=1)
    no_split = ~np.isfinite(best) | (parent - best <= tol)
    feature = np.where(no_split, -1, feature)
    return feature, np.where(no_split, np.nan, best)


def feature_tables(counts):
    """Per-feature (x, y) contingency counts, the sufficient statistic of a split search."""
    cols = []
    for j in range(3):
        for xv in (0, 1):
            for yv in (0, 1):
                mask = (ROW_TYPES[:, j] == xv) & (ROW_TYPES[:, 3] == yv)
                cols.append(counts[:, mask].sum(axis=1))
    return np.stack(cols, axis=1)


def pairwise_auc(y, s):
    """``P(score+ > score-) + 0.5 P(score+ == score-)`` over all pairs."""
    y = np.asarray(y)
    s = np.asarray(s, dtype=float)
    pos, neg = s[y == 1], s[y == 0]
    diff = pos[:, None] - neg[None, :]
    return ((diff > 0).sum() + 0.5 * (diff == 0).sum()) / (len(pos) * len(neg))
