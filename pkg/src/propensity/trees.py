"""Decision trees, bagged forests and first-order gradient boosting.

Trees split continuous features on midpoints between consecutive distinct
values (``x <= threshold`` goes left) and categorical features one category
against the rest (``x == category`` goes left). Category index 0 is the
unknown slot; at a categorical split it follows the branch that received
more training rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .validation import check_binary_target, check_features

CRITERIA = ("gini", "entropy", "mse")
_TIE_TOL = 1e-12


def impurity(class_counts, criterion: str = "gini") -> float:
    """Gini ``1 - sum p_k^2`` or entropy ``-sum p_k log2 p_k`` of a count vector."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if np.any(counts < 0):
        raise ValueError("class counts must be nonnegative")
    n = counts.sum()
    if n == 0:
        raise ValueError("impurity of an empty node is undefined")
    return float(_impurity_rows(counts[None, :], criterion)[0])


def _impurity_rows(counts: np.ndarray, criterion: str) -> np.ndarray:
    return _impurity_cols(counts.T, criterion)


def _impurity_cols(cols, criterion: str) -> np.ndarray:
    """Impurity per node from one count array per class."""
    counts = np.asarray(cols, dtype=np.float64)
    n = counts.sum(axis=0)
    p = counts / np.where(n > 0, n, 1.0)
    if criterion == "gini":
        out = 1.0 - (p * p).sum(axis=0)
    elif criterion == "entropy":
        out = -(p * np.log2(np.where(p > 0, p, 1.0))).sum(axis=0)
    else:
        raise ValueError(f"unknown classification criterion {criterion!r}")
    return np.where(n > 0, out, 0.0)


def _mse_rows(sums: np.ndarray, sq_sums: np.ndarray, n: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore"):
        var = sq_sums / n - (sums / n) ** 2
    return np.maximum(np.nan_to_num(var), 0.0)


@dataclass(frozen=True)
class Split:
    """A candidate split of one feature.

    ``threshold`` is a midpoint for continuous features and a category index
    for categorical ones.
    """

    feature: int
    threshold: float
    categorical: bool
    weighted_impurity: float
    gain: float
    n_left: int
    n_right: int


def _node_impurity(y: np.ndarray, criterion: str, n_classes: int) -> float:
    if criterion == "mse":
        return float(np.var(y)) if y.size else 0.0
    counts = np.bincount(y, minlength=n_classes).astype(float)
    return float(_impurity_cols(counts[:, None], criterion)[0])


def best_split(X, y, feature: int, criterion: str = "gini", categorical: bool = False,
               min_samples_leaf: int = 1, n_classes: int = 2) -> Split | None:
    """Best split of one feature, minimizing the row-weighted child impurity.

    Returns ``None`` when the feature admits no split (constant values or
    ``min_samples_leaf`` unmet) or when the best split has zero gain. Among
    equally good splits the lowest threshold wins.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] < 2:
        raise ValueError("best_split needs at least two rows")
    parent = _node_impurity(y, criterion, n_classes)
    split = _split_feature(X[:, feature], y, feature, criterion, categorical,
                           min_samples_leaf, n_classes, parent)
    if split is None or split.gain <= _TIE_TOL * max(1.0, parent):
        return None
    return split


def _split_feature(x, y, feature, criterion, categorical, min_leaf, n_classes, parent):
    n = x.size
    tol = _TIE_TOL * max(1.0, parent)
    if categorical:
        codes = x.astype(np.int64)
        cats = np.unique(codes)
        if cats.size < 2:
            return None
        n_left = np.bincount(codes)[cats].astype(float)
        if criterion == "mse":
            s = np.bincount(codes, weights=y)[cats]
            q = np.bincount(codes, weights=y * y)[cats]
            imp_l = _mse_rows(s, q, n_left)
            imp_r = _mse_rows(y.sum() - s, (y * y).sum() - q, n - n_left)
        else:
            joint = np.bincount(codes * n_classes + y, minlength=(cats[-1] + 1) * n_classes)
            joint = joint.reshape(-1, n_classes)[cats].T.astype(float)
            totals = joint.sum(axis=1)
            imp_l = _impurity_cols(joint, criterion)
            imp_r = _impurity_cols(totals[:, None] - joint, criterion)
        candidates = cats.astype(float)
    else:
        order = np.argsort(x)
        xs, ys = x[order], y[order]
        # split after position i-1 wherever the next value differs
        cut = np.flatnonzero(xs[1:] != xs[:-1]) + 1
        if cut.size == 0:
            return None
        n_left = cut.astype(float)
        if criterion == "mse":
            cs = np.cumsum(ys)[cut - 1]
            cq = np.cumsum(ys * ys)[cut - 1]
            imp_l = _mse_rows(cs, cq, n_left)
            imp_r = _mse_rows(ys.sum() - cs, (ys * ys).sum() - cq, n - n_left)
        else:
            onehot = ys[:, None] == np.arange(n_classes)
            left = np.cumsum(onehot, axis=0)[cut - 1].T
            imp_l = _impurity_cols(left, criterion)
            imp_r = _impurity_cols(onehot.sum(axis=0)[:, None] - left, criterion)
        candidates = (xs[cut - 1] + xs[cut]) / 2
    n_right = n - n_left
    ok = (n_left >= min_leaf) & (n_right >= min_leaf)
    if not ok.any():
        return None
    weighted = (n_left * imp_l + n_right * imp_r) / n
    weighted = np.where(ok, weighted, np.inf)
    best = int(np.argmax(weighted <= weighted.min() + tol))
    w = float(weighted[best])
    return Split(feature, float(candidates[best]), categorical, w, parent - w,
                 int(n_left[best]), int(n_right[best]))


def find_split(X, y, criterion="gini", categorical_mask=None, min_samples_leaf=1,
               n_classes=2) -> Split | None:
    """Best split over all features; ties go to the lowest feature index."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if categorical_mask is None:
        categorical_mask = np.zeros(X.shape[1], dtype=bool)
    parent = _node_impurity(y, criterion, n_classes)
    tol = _TIE_TOL * max(1.0, parent)
    chosen = None
    for j in range(X.shape[1]):
        s = _split_feature(X[:, j], y, j, criterion, bool(categorical_mask[j]),
                           min_samples_leaf, n_classes, parent)
        if s is not None and (chosen is None or s.weighted_impurity < chosen.weighted_impurity - tol):
            chosen = s
    if chosen is None or chosen.gain <= tol:
        return None
    return chosen


# ---------------------------------------------------------------------------
# flat tree
# ---------------------------------------------------------------------------

class Tree:
    """Array-backed binary tree; node 0 is the root, leaves have ``left == -1``."""

    def __init__(self, n_features: int, criterion: str, n_classes: int = 2):
        self.n_features = n_features
        self.criterion = criterion
        self.n_classes = n_classes
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.categorical: list[bool] = []
        self.unknown_left: list[bool] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[list[float]] = []
        self.n_samples: list[int] = []
        self.impurity: list[float] = []
        self.gain: list[float] = []
        self.depth: list[int] = []

    def _add(self, value, n, imp, depth) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.categorical.append(False)
        self.unknown_left.append(False)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append([float(v) for v in value])
        self.n_samples.append(int(n))
        self.impurity.append(float(imp))
        self.gain.append(0.0)
        self.depth.append(depth)
        return len(self.feature) - 1

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def max_depth(self) -> int:
        return max(self.depth)

    def _arrays(self):
        cache = getattr(self, "_cache", None)
        if cache is None or cache[0] != self.node_count:
            cache = (self.node_count, np.array(self.feature), np.array(self.threshold),
                     np.array(self.categorical), np.array(self.unknown_left),
                     np.array(self.left), np.array(self.right), np.array(self.value))
            self._cache = cache
        return cache[1:]

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        feature, threshold, categorical, unknown_left, left, right, _ = self._arrays()
        node = np.zeros(X.shape[0], dtype=np.intp)
        active = left[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            nd = node[rows]
            x = X[rows, feature[nd]]
            cat = categorical[nd]
            go_left = np.where(cat,
                               np.where(x == 0, unknown_left[nd], x == threshold[nd]),
                               x <= threshold[nd])
            node[rows] = np.where(go_left, left[nd], right[nd])
            active = left[node] >= 0
        return node

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self._arrays()[-1][self.apply(X)]

    def to_dict(self) -> dict:
        keys = ("feature", "threshold", "categorical", "unknown_left", "left", "right",
                "value", "n_samples", "impurity", "gain", "depth")
        return {"n_features": self.n_features, "criterion": self.criterion,
                "n_classes": self.n_classes, "nodes": [
                    {k: getattr(self, k)[i] for k in keys} for i in range(self.node_count)]}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        tree = cls(d["n_features"], d["criterion"], d["n_classes"])
        for rec in d["nodes"]:
            for k, v in rec.items():
                getattr(tree, k).append(v)
        return tree


def grow_tree(X, y, criterion="gini", max_depth=None, min_samples_leaf=1,
              min_samples_split=2, categorical_mask=None, n_classes=2) -> Tree:
    """Greedy recursive partitioning.

    A node becomes a leaf at ``max_depth``, when pure, when it holds fewer
    than ``min_samples_split`` rows, or when no split has positive gain.
    Classification leaves store class frequencies; ``mse`` leaves store the
    mean target.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise ValueError("cannot grow a tree on zero rows")
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}")
    if categorical_mask is None:
        categorical_mask = np.zeros(X.shape[1], dtype=bool)
    tree = Tree(X.shape[1], criterion, n_classes)

    def leaf_value(idx):
        if criterion == "mse":
            return [float(y[idx].mean())]
        counts = np.bincount(y[idx], minlength=n_classes).astype(float)
        return (counts / counts.sum()).tolist()

    stack = [(np.arange(X.shape[0]), 0, None, False)]
    while stack:
        idx, depth, parent, is_left = stack.pop()
        imp = _node_impurity(y[idx], criterion, n_classes)
        node = tree._add(leaf_value(idx), idx.size, imp, depth)
        if parent is not None:
            (tree.left if is_left else tree.right)[parent] = node
        if ((max_depth is not None and depth >= max_depth) or imp <= 0
                or idx.size < max(2, min_samples_split)):
            continue
        split = find_split(X[idx], y[idx], criterion, categorical_mask,
                           min_samples_leaf, n_classes)
        if split is None:
            continue
        x = X[idx, split.feature]
        go_left = (x == split.threshold) if split.categorical else (x <= split.threshold)
        tree.feature[node] = split.feature
        tree.threshold[node] = split.threshold
        tree.categorical[node] = split.categorical
        tree.unknown_left[node] = split.n_left > split.n_right
        tree.gain[node] = split.gain
        # push right first so the left subtree is numbered first
        stack.append((idx[~go_left], depth + 1, node, False))
        stack.append((idx[go_left], depth + 1, node, True))
    return tree


def tree_importance(tree: Tree) -> np.ndarray:
    """Unnormalized sum of ``row fraction * gain`` over internal nodes."""
    out = np.zeros(tree.n_features)
    root_n = tree.n_samples[0]
    for f, n, g, left in zip(tree.feature, tree.n_samples, tree.gain, tree.left):
        if left >= 0:
            out[f] += n / root_n * g
    return out


def _normalize(imp: np.ndarray) -> np.ndarray:
    s = imp.sum()
    return imp / s if s > 0 else imp


def feature_importance(model) -> np.ndarray:
    """Gain-based importances of a fitted tree, forest or boosting model, summing to 1."""
    if isinstance(model, Tree):
        trees = [model]
    else:
        check_is_fitted(model, "trees_")
        trees = model.trees_
    return _normalize(sum(tree_importance(t) for t in trees))


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def _categorical_mask(categorical_features, n_features: int) -> np.ndarray:
    mask = np.zeros(n_features, dtype=bool)
    if categorical_features is None:
        return mask
    cf = np.asarray(categorical_features)
    if cf.dtype == bool:
        if cf.size != n_features:
            raise ValueError("boolean categorical_features must have one entry per feature")
        return cf.copy()
    mask[cf.astype(int)] = True
    return mask


class _TreeModelMixin:
    @property
    def feature_importances_(self) -> np.ndarray:
        return feature_importance(self)


class DecisionTreeClassifier(_TreeModelMixin, ClassifierMixin, BaseEstimator):
    """Single classification tree.

    Parameters
    ----------
    criterion : {"gini", "entropy"}, default="entropy"
    max_depth : int or None, default=5
    min_samples_leaf : int, default=1
    min_samples_split : int, default=2
    categorical_features : array-like of int or bool, default=None
        Columns holding category indices (0 = unknown).
    """

    def __init__(self, criterion="entropy", max_depth=5, min_samples_leaf=1,
                 min_samples_split=2, categorical_features=None):
        self.criterion = criterion
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.min_samples_split = min_samples_split
        self.categorical_features = categorical_features

    def fit(self, X, y):
        X, y = check_features(X, y)
        y = check_binary_target(y)
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        self.tree_ = grow_tree(X, y, self.criterion, self.max_depth, self.min_samples_leaf,
                               self.min_samples_split,
                               _categorical_mask(self.categorical_features, X.shape[1]))
        self.trees_ = [self.tree_]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "tree_")
        X = check_features(X, n_features=self.n_features_in_)
        return self.tree_.predict_value(X)

    def predict(self, X):
        # ties go to class 0
        return (self.predict_proba(X)[:, 1] > 0.5).astype(np.int64)


def _fit_one_tree(X, y, rows, criterion, max_depth, min_leaf, min_split, mask):
    return grow_tree(X[rows], y[rows], criterion, max_depth, min_leaf, min_split, mask)


class RandomForestClassifier(_TreeModelMixin, ClassifierMixin, BaseEstimator):
    """Committee of trees grown on bootstrap samples, combined by majority vote.

    Parameters
    ----------
    n_estimators : int, default=200
    max_samples : int or None, default=None
        Bootstrap sample size; ``None`` draws as many rows as the training set.
    bootstrap : bool, default=True
        When False every tree sees the full training set in order.
    criterion, max_depth, min_samples_leaf, min_samples_split, categorical_features
        As in :class:`DecisionTreeClassifier` (criterion defaults to "gini").
    random_state : int, default=0
        Master seed; tree ``i`` uses the ``i``-th spawned child seed.
    n_jobs : int or None, default=None
        Trees to grow in parallel. Results do not depend on it.
    """

    def __init__(self, n_estimators=200, max_samples=None, bootstrap=True, criterion="gini",
                 max_depth=5, min_samples_leaf=1, min_samples_split=2,
                 categorical_features=None, random_state=0, n_jobs=None):
        self.n_estimators = n_estimators
        self.max_samples = max_samples
        self.bootstrap = bootstrap
        self.criterion = criterion
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.min_samples_split = min_samples_split
        self.categorical_features = categorical_features
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        X, y = check_features(X, y)
        y = check_binary_target(y)
        n = X.shape[0]
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        size = n if self.max_samples is None else int(self.max_samples)
        seeds = np.random.SeedSequence(self.random_state).spawn(self.n_estimators)
        samples = [
            np.random.default_rng(s).integers(0, n, size) if self.bootstrap else np.arange(n)
            for s in seeds
        ]
        mask = _categorical_mask(self.categorical_features, X.shape[1])
        self.trees_ = Parallel(n_jobs=self.n_jobs)(
            delayed(_fit_one_tree)(X, y, rows, self.criterion, self.max_depth,
                                   self.min_samples_leaf, self.min_samples_split, mask)
            for rows in samples
        )
        return self

    def _votes(self, X):
        check_is_fitted(self, "trees_")
        X = check_features(X, n_features=self.n_features_in_)
        return np.stack([(t.predict_value(X)[:, 1] > 0.5) for t in self.trees_]).astype(float)

    def predict_proba(self, X):
        """Fraction of trees voting for each class."""
        p1 = self._votes(X).mean(axis=0)
        return np.column_stack([1 - p1, p1])

    def predict(self, X):
        votes = self._votes(X)
        return (votes.sum(axis=0) * 2 > votes.shape[0]).astype(np.int64)


class GradientBoostingClassifier(_TreeModelMixin, ClassifierMixin, BaseEstimator):
    """Stage-wise additive trees, each fit to the current residual.

    ``F_0`` is the mean label (squared loss) or the log-odds of the positive
    rate (logistic loss). Stage ``m`` fits a regression tree ``h`` to
    ``y - F_m`` (squared) or ``y - sigmoid(F_m)`` (logistic) and sets
    ``F_{m+1} = F_m + learning_rate * h``.

    Parameters
    ----------
    n_estimators : int, default=300
    learning_rate : float, default=0.1
    max_depth : int, default=5
    loss : {"logistic", "squared"}, default="logistic"
    subsample : float, default=1.0
        Share of rows each stage sees, drawn without replacement.
    min_samples_leaf : int, default=1
    categorical_features : array-like, default=None
    random_state : int, default=0

    Attributes
    ----------
    init_ : float
    train_loss_ : ndarray of shape (n_estimators + 1,)
        Training loss of ``F_0`` followed by the loss after each stage;
        ``0.5 * mean((y - F)^2)`` or the mean log-loss.
    """

    def __init__(self, n_estimators=300, learning_rate=0.1, max_depth=5, loss="logistic",
                 subsample=1.0, min_samples_leaf=1, categorical_features=None, random_state=0):
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.loss = loss
        self.subsample = subsample
        self.min_samples_leaf = min_samples_leaf
        self.categorical_features = categorical_features
        self.random_state = random_state

    def _loss(self, y, F):
        if self.loss == "squared":
            return 0.5 * float(np.mean((y - F) ** 2))
        return float(np.mean(np.logaddexp(0.0, F) - y * F))

    def fit(self, X, y):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if not 0 <= self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in [0, 1]")
        if self.loss not in ("logistic", "squared"):
            raise ValueError("loss must be 'logistic' or 'squared'")
        X, y = check_features(X, y)
        y = check_binary_target(y).astype(np.float64)
        n = X.shape[0]
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        mask = _categorical_mask(self.categorical_features, X.shape[1])
        rate = y.mean()
        if self.loss == "squared":
            self.init_ = float(rate)
        else:
            rate = min(max(rate, 1e-12), 1 - 1e-12)
            self.init_ = float(np.log(rate / (1 - rate)))
        F = np.full(n, self.init_)
        rng = np.random.default_rng(self.random_state)
        self.trees_, losses = [], [self._loss(y, F)]
        for _ in range(self.n_estimators):
            residual = y - (F if self.loss == "squared" else _sigmoid(F))
            rows = np.arange(n)
            if self.subsample < 1.0:
                rows = np.sort(rng.choice(n, max(1, int(self.subsample * n)), replace=False))
            tree = grow_tree(X[rows], residual[rows], "mse", self.max_depth,
                             self.min_samples_leaf, 2, mask, n_classes=1)
            F = F + self.learning_rate * tree.predict_value(X)[:, 0]
            self.trees_.append(tree)
            losses.append(self._loss(y, F))
        self.train_loss_ = np.array(losses)
        return self

    def decision_function(self, X):
        """Additive score ``F_M(x)``."""
        check_is_fitted(self, "trees_")
        X = check_features(X, n_features=self.n_features_in_)
        F = np.full(X.shape[0], self.init_)
        for tree in self.trees_:
            F += self.learning_rate * tree.predict_value(X)[:, 0]
        return F

    def predict_proba(self, X):
        F = self.decision_function(X)
        p1 = np.clip(F, 0.0, 1.0) if self.loss == "squared" else _sigmoid(F)
        return np.column_stack([1 - p1, p1])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(np.int64)


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))
