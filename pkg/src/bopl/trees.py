"""Decision-tree predictors and the exact greedy CART learners that fit them.

Trees are stored as flat node arrays (index 0 is the root) so that models
serialize without recursion and predict with a simple iterative descent.
A row goes left when ``row[feature] <= threshold``.

Split search is exact: every midpoint between consecutive distinct sorted
values of every feature is a candidate.  Ties between candidates break
toward the lowest feature index, then the lowest threshold.  The inner
scans are numba-compiled; everything is sequential and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

REGRESSION_TREE = "regression_tree"
CLASSIFICATION_TREE = "classification_tree"

@dataclass
class TreeParams:
    """Growth limits for the CART learners.

    max_depth 0 means a single leaf.  min_child_weight is the minimum sum
    of sample weights allowed in each child of a split.  reg_lambda is a
    ridge term applied to regression leaf values only.
    """

    max_depth: int
    min_child_weight: float = 0.0
    reg_lambda: float = 0.0

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_child_weight < 0:
            raise ValueError("min_child_weight must be >= 0")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be >= 0")


@dataclass(eq=False)
class Tree:
    """Binary tree as parallel node arrays; leaves hold real values."""

    is_leaf: np.ndarray  # uint8
    feature: np.ndarray  # int64, -1 on leaves
    threshold: np.ndarray  # float64, nan on leaves
    value: np.ndarray  # float64, leaf values (0 on internal nodes)
    left: np.ndarray  # int64, -1 on leaves
    right: np.ndarray  # int64, -1 on leaves

    @property
    def num_nodes(self) -> int:
        return self.is_leaf.shape[0]

    def predict(self, rows: np.ndarray) -> np.ndarray:
        rows = np.ascontiguousarray(rows, dtype=np.float64)
        if rows.ndim != 2:
            raise ValueError("predict expects a 2-d row matrix")
        return _predict(
            self.is_leaf, self.feature, self.threshold, self.value,
            self.left, self.right, rows,
        )

    def max_abs_leaf(self) -> float:
        leaves = self.value[self.is_leaf == 1]
        return float(np.max(np.abs(leaves))) if leaves.size else 0.0


def leaf_tree(value: float) -> Tree:
    """A single-leaf tree returning ``value`` for every row."""
    return Tree(
        is_leaf=np.array([1], dtype=np.uint8),
        feature=np.array([-1], dtype=np.int64),
        threshold=np.array([np.nan]),
        value=np.array([float(value)]),
        left=np.array([-1], dtype=np.int64),
        right=np.array([-1], dtype=np.int64),
    )


@dataclass
class Predictor:
    """A fitted tree with a positive output scale.

    kind is "regression_tree" or "classification_tree"; classification
    leaves are exactly +-1 before scaling.  The scale carries the
    rescaling applied to satisfy the boosting norm constraint.
    """

    kind: str
    tree: Tree
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in (REGRESSION_TREE, CLASSIFICATION_TREE):
            raise ValueError(f"unknown predictor kind: {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("scale must be > 0")

    def predict_rows(self, rows: np.ndarray) -> np.ndarray:
        """Scaled outputs on already-augmented [x; e_a] rows."""
        return self.scale * self.tree.predict(rows)

    def action_scores(self, contexts: np.ndarray, num_actions: int) -> np.ndarray:
        """(n, num_actions) scores, one column per one-hot-augmented action."""
        contexts = np.atleast_2d(np.asarray(contexts, dtype=np.float64))
        rows = augment_contexts(contexts, num_actions)
        return self.predict_rows(rows).reshape(contexts.shape[0], num_actions)


def augment_contexts(contexts: np.ndarray, num_actions: int) -> np.ndarray:
    """Expand contexts to (n * num_actions) rows of [x; e_a], a-major within i."""
    contexts = np.asarray(contexts, dtype=np.float64)
    n, d = contexts.shape
    rows = np.zeros((n * num_actions, d + num_actions))
    rows[:, :d] = np.repeat(contexts, num_actions, axis=0)
    rows[np.arange(n * num_actions), d + np.tile(np.arange(num_actions), n)] = 1.0
    return rows


@dataclass(eq=False)
class Presort:
    """Per-feature stable sort of a fixed design matrix, reusable across fits."""

    order: np.ndarray  # (d, m) int64, row indices in ascending feature order
    sorted_values: np.ndarray  # (d, m) float64


def presort_features(features: np.ndarray) -> Presort:
    X = np.ascontiguousarray(features, dtype=np.float64)
    order = np.argsort(X, axis=0, kind="stable").T.copy()
    sorted_values = np.take_along_axis(X.T, order, axis=1).copy()
    return Presort(order=order, sorted_values=sorted_values)


@dataclass(eq=False)
class RegressionSamples:
    """Weighted least-squares rows: one (features, weight, target) per row."""

    features: np.ndarray  # (m, d)
    weights: np.ndarray  # (m,), >= 0
    targets: np.ndarray  # (m,)


@dataclass(eq=False)
class ClassificationSamples:
    """Weighted binary-classification rows with labels exactly +-1."""

    features: np.ndarray  # (m, d)
    weights: np.ndarray  # (m,), >= 0
    labels: np.ndarray  # (m,), values in {-1.0, +1.0}


def fit_regression_tree(
    samples: RegressionSamples,
    params: TreeParams,
    presorted: Presort | None = None,
) -> Predictor:
    """Greedy CART minimizing weighted squared error with ridge leaf values.

    Leaf value is (sum w*y) / (sum w + reg_lambda).  A split is accepted
    only if it strictly reduces the ridge-penalized error and both
    children carry at least min_child_weight total weight.  presorted,
    when given, must describe samples.features and is only honored when
    no zero-weight rows need dropping.
    """
    X, w, y, presorted = _prepare(
        samples.features, samples.weights, samples.targets, presorted
    )
    if X.shape[0] == 0 or float(w.sum()) <= 0.0:
        raise ValueError("cannot fit a tree on zero total weight")
    nodes = _grow_regression(
        X, presorted.order, presorted.sorted_values, w, y,
        params.max_depth, params.min_child_weight, params.reg_lambda,
    )
    return Predictor(kind=REGRESSION_TREE, tree=Tree(*nodes), scale=1.0)


def fit_classification_tree(
    samples: ClassificationSamples,
    params: TreeParams,
    presorted: Presort | None = None,
) -> Predictor:
    """Greedy CART for weighted binary classification with +-1 leaves.

    Splits minimize the weighted misclassification error of majority-labeled
    children, with weighted Gini impurity breaking ties (then lowest feature,
    lowest threshold).  At depth 1 this attains the error-optimal stump.
    Leaf label is the sign of the weighted label sum; a zero sum labels +1.
    """
    labels = np.asarray(samples.labels, dtype=np.float64)
    if not np.all(np.isin(labels, (-1.0, 1.0))):
        raise ValueError("classification labels must be exactly +-1")
    X, w, y, presorted = _prepare(samples.features, samples.weights, labels, presorted)
    if X.shape[0] == 0 or float(w.sum()) <= 0.0:
        raise ValueError("cannot fit a tree on zero total weight")
    nodes = _grow_classification(
        X, presorted.order, presorted.sorted_values, w, y,
        params.max_depth, params.min_child_weight,
    )
    return Predictor(kind=CLASSIFICATION_TREE, tree=Tree(*nodes), scale=1.0)


def _prepare(features, weights, targets, presorted):
    X = np.ascontiguousarray(features, dtype=np.float64)
    w = np.ascontiguousarray(weights, dtype=np.float64)
    y = np.ascontiguousarray(targets, dtype=np.float64)
    if X.ndim != 2 or w.shape != (X.shape[0],) or y.shape != (X.shape[0],):
        raise ValueError("samples have inconsistent shapes")
    if np.any(w < 0):
        raise ValueError("sample weights must be nonnegative")
    keep = w > 0.0  # zero-weight rows cannot affect the objective
    if not np.all(keep):
        X, w, y = X[keep], w[keep], y[keep]
        presorted = None  # the cached order no longer matches the rows
    if presorted is None:
        presorted = presort_features(X)
    return X, w, y, presorted


@njit(cache=True)
def _predict(is_leaf, feature, threshold, value, left, right, rows):
    m = rows.shape[0]
    out = np.empty(m)
    for i in range(m):
        nd = 0
        while is_leaf[nd] == 0:
            if rows[i, feature[nd]] <= threshold[nd]:
                nd = left[nd]
            else:
                nd = right[nd]
        out[i] = value[nd]
    return out


@njit(cache=True)
def _grow_regression(X, order, xsort, w, y, max_depth, min_child_weight, reg_lambda):
    m, d = X.shape
    cap = 2 * m + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.full(cap, np.nan)
    value = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    is_leaf = np.zeros(cap, dtype=np.uint8)

    node_w = np.zeros(cap)
    node_wy = np.zeros(cap)
    node_of = np.zeros(m, dtype=np.int64)
    wy = w * y
    node_w[0] = w.sum()
    node_wy[0] = wy.sum()

    active = np.zeros(cap, dtype=np.uint8)
    active[0] = 1
    n_nodes = 1
    n_active = 1

    best_score = np.zeros(cap)
    best_feat = np.full(cap, -1, dtype=np.int64)
    best_thr = np.zeros(cap)
    acc_w = np.zeros(cap)
    acc_wy = np.zeros(cap)
    last_v = np.zeros(cap)
    seen = np.zeros(cap, dtype=np.uint8)

    for _depth in range(max_depth):
        if n_active == 0:
            break
        lo, hi = 0, n_nodes
        for nd in range(lo, hi):
            if active[nd]:
                # score of keeping nd as a ridge leaf
                best_score[nd] = node_wy[nd] * node_wy[nd] / (node_w[nd] + reg_lambda)
                best_feat[nd] = -1
        for f in range(d):
            for nd in range(lo, hi):
                if active[nd]:
                    acc_w[nd] = 0.0
                    acc_wy[nd] = 0.0
                    seen[nd] = 0
            for k in range(m):
                r = order[f, k]
                nd = node_of[r]
                if not active[nd]:
                    continue
                v = xsort[f, k]
                if seen[nd] == 1 and v > last_v[nd]:
                    wl = acc_w[nd]
                    wr = node_w[nd] - wl
                    if (
                        wl > 0.0 and wr > 0.0
                        and wl >= min_child_weight and wr >= min_child_weight
                    ):
                        wyl = acc_wy[nd]
                        wyr = node_wy[nd] - wyl
                        sc = wyl * wyl / (wl + reg_lambda) + wyr * wyr / (wr + reg_lambda)
                        if sc > best_score[nd]:
                            best_score[nd] = sc
                            best_feat[nd] = f
                            thr = 0.5 * (last_v[nd] + v)
                            if thr >= v:  # adjacent floats: keep partition exact
                                thr = last_v[nd]
                            best_thr[nd] = thr
                acc_w[nd] += w[r]
                acc_wy[nd] += wy[r]
                last_v[nd] = v
                seen[nd] = 1
        n_active = 0
        for nd in range(lo, hi):
            if not active[nd]:
                continue
            active[nd] = 0
            if best_feat[nd] >= 0:
                feature[nd] = best_feat[nd]
                threshold[nd] = best_thr[nd]
                lc = n_nodes
                rc = n_nodes + 1
                n_nodes += 2
                left[nd] = lc
                right[nd] = rc
                active[lc] = 1
                active[rc] = 1
                n_active += 2
        if n_active == 0:
            break
        for r in range(m):
            nd = node_of[r]
            if feature[nd] >= 0:
                child = left[nd] if X[r, feature[nd]] <= threshold[nd] else right[nd]
                node_of[r] = child
                node_w[child] += w[r]
                node_wy[child] += wy[r]

    for nd in range(n_nodes):
        if feature[nd] < 0:
            is_leaf[nd] = 1
            value[nd] = node_wy[nd] / (node_w[nd] + reg_lambda)

    return (
        is_leaf[:n_nodes].copy(), feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(), value[:n_nodes].copy(),
        left[:n_nodes].copy(), right[:n_nodes].copy(),
    )


@njit(cache=True)
def _grow_classification(X, order, xsort, w, ylab, max_depth, min_child_weight):
    m, d = X.shape
    cap = 2 * m + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.full(cap, np.nan)
    value = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    is_leaf = np.zeros(cap, dtype=np.uint8)

    node_wp = np.zeros(cap)  # weight of +1 labels
    node_wn = np.zeros(cap)  # weight of -1 labels
    node_of = np.zeros(m, dtype=np.int64)
    for r in range(m):
        if ylab[r] > 0.0:
            node_wp[0] += w[r]
        else:
            node_wn[0] += w[r]

    active = np.zeros(cap, dtype=np.uint8)
    active[0] = 1
    n_nodes = 1
    n_active = 1

    best_err = np.zeros(cap)
    best_gini = np.zeros(cap)
    best_feat = np.full(cap, -1, dtype=np.int64)
    best_thr = np.zeros(cap)
    acc_wp = np.zeros(cap)
    acc_wn = np.zeros(cap)
    last_v = np.zeros(cap)
    seen = np.zeros(cap, dtype=np.uint8)

    for _depth in range(max_depth):
        if n_active == 0:
            break
        lo, hi = 0, n_nodes
        for nd in range(lo, hi):
            if active[nd]:
                wp, wn = node_wp[nd], node_wn[nd]
                best_err[nd] = min(wp, wn)
                best_gini[nd] = 2.0 * wp * wn / (wp + wn)
                best_feat[nd] = -1
        for f in range(d):
            for nd in range(lo, hi):
                if active[nd]:
                    acc_wp[nd] = 0.0
                    acc_wn[nd] = 0.0
                    seen[nd] = 0
            for k in range(m):
                r = order[f, k]
                nd = node_of[r]
                if not active[nd]:
                    continue
                v = xsort[f, k]
                if seen[nd] == 1 and v > last_v[nd]:
                    wpl, wnl = acc_wp[nd], acc_wn[nd]
                    wpr = node_wp[nd] - wpl
                    wnr = node_wn[nd] - wnl
                    wl = wpl + wnl
                    wr = wpr + wnr
                    if (
                        wl > 0.0 and wr > 0.0
                        and wl >= min_child_weight and wr >= min_child_weight
                    ):
                        err = min(wpl, wnl) + min(wpr, wnr)
                        gini = 2.0 * (wpl * wnl / wl + wpr * wnr / wr)
                        if err < best_err[nd] or (
                            err == best_err[nd] and gini < best_gini[nd]
                        ):
                            best_err[nd] = err
                            best_gini[nd] = gini
                            best_feat[nd] = f
                            thr = 0.5 * (last_v[nd] + v)
                            if thr >= v:
                                thr = last_v[nd]
                            best_thr[nd] = thr
                if ylab[r] > 0.0:
                    acc_wp[nd] += w[r]
                else:
                    acc_wn[nd] += w[r]
                last_v[nd] = v
                seen[nd] = 1
        n_active = 0
        for nd in range(lo, hi):
            if not active[nd]:
                continue
            active[nd] = 0
            if best_feat[nd] >= 0:
                feature[nd] = best_feat[nd]
                threshold[nd] = best_thr[nd]
                lc = n_nodes
                rc = n_nodes + 1
                n_nodes += 2
                left[nd] = lc
                right[nd] = rc
                active[lc] = 1
                active[rc] = 1
                n_active += 2
        if n_active == 0:
            break
        for r in range(m):
            nd = node_of[r]
            if feature[nd] >= 0:
                child = left[nd] if X[r, feature[nd]] <= threshold[nd] else right[nd]
                node_of[r] = child
                if ylab[r] > 0.0:
                    node_wp[child] += w[r]
                else:
                    node_wn[child] += w[r]

    for nd in range(n_nodes):
        if feature[nd] < 0:
            is_leaf[nd] = 1
            value[nd] = 1.0 if node_wp[nd] >= node_wn[nd] else -1.0

    return (
        is_leaf[:n_nodes].copy(), feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(), value[:n_nodes].copy(),
        left[:n_nodes].copy(), right[:n_nodes].copy(),
    )
