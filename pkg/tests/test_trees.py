import numpy as np
import pytest

from bopl.trees import (
    ClassificationSamples,
    RegressionSamples,
    TreeParams,
    fit_classification_tree,
    fit_regression_tree,
)


def candidate_thresholds(values):
    vs = np.unique(values)
    return [(vs[k] + vs[k + 1]) / 2.0 for k in range(len(vs) - 1)]


def regression_oracle_best_stump(X, w, y, reg_lambda=0.0, min_child_weight=0.0):
    """Exhaustive enumeration of every (feature, midpoint) split.

    Returns (sse, feature, threshold, left_value, right_value) of the best
    split under the ridge-penalized weighted squared error, ties broken by
    lowest feature then lowest threshold; feature is None when no split
    beats the single ridge leaf.
    """
    def node_cost(mask):
        ww, yy = w[mask], y[mask]
        v = np.sum(ww * yy) / (np.sum(ww) + reg_lambda)
        return np.sum(ww * (yy - v) ** 2) + reg_lambda * v * v, v

    best = (node_cost(np.ones(len(y), dtype=bool))[0], None, None, None, None)
    for f in range(X.shape[1]):
        for thr in candidate_thresholds(X[:, f]):
            left = X[:, f] <= thr
            wl, wr = np.sum(w[left]), np.sum(w[~left])
            if wl <= 0 or wr <= 0 or wl < min_child_weight or wr < min_child_weight:
                continue
            cl, vl = node_cost(left)
            cr, vr = node_cost(~left)
            if cl + cr < best[0] - 1e-12:
                best = (cl + cr, f, thr, vl, vr)
    return best


def classification_oracle_best_error(X, w, labels, min_child_weight=0.0):
    """Minimum weighted error over all stumps plus the two constant trees."""
    def side_error(mask):
        wp = np.sum(w[mask & (labels > 0)])
        wn = np.sum(w[mask & (labels < 0)])
        return min(wp, wn)

    best = side_error(np.ones(len(labels), dtype=bool))
    for f in range(X.shape[1]):
        for thr in candidate_thresholds(X[:, f]):
            left = X[:, f] <= thr
            wl, wr = np.sum(w[left]), np.sum(w[~left])
            if wl <= 0 or wr <= 0 or wl < min_child_weight or wr < min_child_weight:
                continue
            best = min(best, side_error(left) + side_error(~left))
    return best


def test_depth_zero_is_weighted_mean():
    s = RegressionSamples(
        features=np.array([[0.0], [1.0], [2.0], [3.0]]),
        weights=np.array([1.0, 2.0, 3.0, 4.0]),
        targets=np.array([4.0, -1.0, 0.5, 2.0]),
    )
    pred = fit_regression_tree(s, TreeParams(max_depth=0))
    expected = np.sum(s.weights * s.targets) / np.sum(s.weights)
    assert pred.tree.num_nodes == 1
    assert pred.predict_rows(s.features) == pytest.approx([expected] * 4, abs=1e-15)


def test_depth_zero_ridge_leaf():
    s = RegressionSamples(
        features=np.array([[0.0], [1.0]]),
        weights=np.array([1.0, 3.0]),
        targets=np.array([2.0, -2.0]),
    )
    lam = 0.7
    pred = fit_regression_tree(s, TreeParams(max_depth=0, reg_lambda=lam))
    expected = (1.0 * 2.0 + 3.0 * -2.0) / (4.0 + lam)
    assert pred.tree.value[0] == pytest.approx(expected, rel=1e-15)


def test_large_ridge_drives_leaves_to_zero():
    rng = np.random.default_rng(3)
    s = RegressionSamples(
        features=rng.random((10, 2)),
        weights=np.ones(10),
        targets=rng.normal(size=10),
    )
    pred = fit_regression_tree(s, TreeParams(max_depth=2, reg_lambda=1e12))
    assert np.max(np.abs(pred.tree.value)) < 1e-10


def test_four_point_split_matches_enumeration():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    w = np.array([1.0, 1.0, 2.0, 1.0])
    y = np.array([0.0, 0.1, 5.0, 5.5])
    _, f, thr, vl, vr = regression_oracle_best_stump(X, w, y)
    pred = fit_regression_tree(
        RegressionSamples(X, w, y), TreeParams(max_depth=1)
    )
    tree = pred.tree
    assert tree.feature[0] == f
    assert tree.threshold[0] == pytest.approx(thr, abs=0)
    assert tree.value[tree.left[0]] == pytest.approx(vl, rel=1e-12)
    assert tree.value[tree.right[0]] == pytest.approx(vr, rel=1e-12)


def test_random_depth1_1feature_matches_enumeration(rng):
    # single feature: the chosen threshold and leaf values must coincide
    # with exhaustive enumeration
    for _ in range(40):
        m = int(rng.integers(4, 12))
        X = rng.random((m, 1))
        w = rng.uniform(0.1, 2.0, m)
        y = rng.normal(size=m)
        lam = float(rng.choice([0.0, 0.3]))
        _, f, thr, vl, vr = regression_oracle_best_stump(X, w, y, reg_lambda=lam)
        pred = fit_regression_tree(
            RegressionSamples(X, w, y), TreeParams(max_depth=1, reg_lambda=lam)
        )
        tree = pred.tree
        if f is None:
            assert tree.num_nodes == 1
        else:
            assert tree.feature[0] == f
            assert tree.threshold[0] == thr
            assert tree.value[tree.left[0]] == pytest.approx(vl, abs=1e-10)
            assert tree.value[tree.right[0]] == pytest.approx(vr, abs=1e-10)


def test_random_depth1_multifeature_cost_optimal(rng):
    # across features exact-score ties can flip under summation order, so
    # require optimality of the achieved penalized cost, not split identity
    for _ in range(40):
        m = int(rng.integers(4, 12))
        d = int(rng.integers(2, 4))
        X = rng.random((m, d))
        w = rng.uniform(0.1, 2.0, m)
        y = rng.normal(size=m)
        lam = float(rng.choice([0.0, 0.3]))
        best_cost, f, *_ = regression_oracle_best_stump(X, w, y, reg_lambda=lam)
        pred = fit_regression_tree(
            RegressionSamples(X, w, y), TreeParams(max_depth=1, reg_lambda=lam)
        )
        tree = pred.tree
        if tree.num_nodes == 1:
            assert f is None
            continue
        left = X[:, tree.feature[0]] <= tree.threshold[0]
        achieved = 0.0
        for mask in (left, ~left):
            v = np.sum(w[mask] * y[mask]) / (np.sum(w[mask]) + lam)
            achieved += np.sum(w[mask] * (y[mask] - v) ** 2) + lam * v * v
        assert achieved <= best_cost + 1e-10


def test_min_child_weight_is_honored(rng):
    for _ in range(20):
        m = 30
        X = rng.random((m, 3))
        w = rng.uniform(0.2, 1.5, m)
        y = rng.normal(size=m)
        mcw = 3.0
        pred = fit_regression_tree(
            RegressionSamples(X, w, y),
            TreeParams(max_depth=4, min_child_weight=mcw),
        )
        tree = pred.tree
        # re-partition the rows and check every leaf's weight sum
        leaves = {}
        for i in range(m):
            nd = 0
            while tree.is_leaf[nd] == 0:
                nd = tree.left[nd] if X[i, tree.feature[nd]] <= tree.threshold[nd] else tree.right[nd]
            leaves[nd] = leaves.get(nd, 0.0) + w[i]
        if tree.num_nodes > 1:
            for total in leaves.values():
                assert total >= mcw - 1e-12


def test_deterministic_tie_break_lowest_feature():
    # two identical features: the split must use feature 0
    X = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    w = np.ones(4)
    y = np.array([0.0, 0.0, 1.0, 1.0])
    pred = fit_regression_tree(RegressionSamples(X, w, y), TreeParams(max_depth=1))
    assert pred.tree.feature[0] == 0
    assert pred.tree.threshold[0] == pytest.approx(1.5)


def test_zero_weight_rows_are_inert():
    X = np.array([[0.0], [1.0], [2.0]])
    w = np.array([1.0, 0.0, 1.0])
    y = np.array([1.0, 100.0, 3.0])
    pred = fit_regression_tree(RegressionSamples(X, w, y), TreeParams(max_depth=0))
    assert pred.tree.value[0] == pytest.approx(2.0)


def test_zero_total_weight_raises():
    s = RegressionSamples(
        features=np.array([[0.0]]), weights=np.array([0.0]), targets=np.array([1.0])
    )
    with pytest.raises(ValueError, match="zero total weight"):
        fit_regression_tree(s, TreeParams(max_depth=1))
    c = ClassificationSamples(
        features=np.array([[0.0]]), weights=np.array([0.0]), labels=np.array([1.0])
    )
    with pytest.raises(ValueError, match="zero total weight"):
        fit_classification_tree(c, TreeParams(max_depth=1))


def test_regression_symmetry_negated_targets(rng):
    m = 20
    X = rng.random((m, 2))
    w = rng.uniform(0.1, 1.0, m)
    y = rng.normal(size=m)
    p1 = fit_regression_tree(RegressionSamples(X, w, y), TreeParams(max_depth=3))
    p2 = fit_regression_tree(RegressionSamples(X, w, -y), TreeParams(max_depth=3))
    assert np.array_equal(p1.tree.feature, p2.tree.feature)
    assert np.array_equal(p1.tree.threshold, p2.tree.threshold, equal_nan=True)
    assert p1.tree.value == pytest.approx(-p2.tree.value)


# ---------------------------------------------------------------------------
# classification trees


def test_constant_positive_labels():
    s = ClassificationSamples(
        features=np.array([[0.0], [1.0]]),
        weights=np.array([1.0, 1.0]),
        labels=np.array([1.0, 1.0]),
    )
    pred = fit_classification_tree(s, TreeParams(max_depth=2))
    assert pred.tree.num_nodes == 1
    assert pred.tree.value[0] == 1.0


def test_separable_stump_zero_error():
    s = ClassificationSamples(
        features=np.array([[0.0], [0.2], [0.8], [1.0]]),
        weights=np.array([1.0, 2.0, 2.0, 1.0]),
        labels=np.array([-1.0, -1.0, 1.0, 1.0]),
    )
    pred = fit_classification_tree(s, TreeParams(max_depth=1))
    out = pred.predict_rows(s.features)
    assert np.all(np.sign(out) == s.labels)


def test_leaf_tie_defaults_positive():
    s = ClassificationSamples(
        features=np.array([[0.0], [0.0]]),
        weights=np.array([1.0, 1.0]),
        labels=np.array([1.0, -1.0]),
    )
    pred = fit_classification_tree(s, TreeParams(max_depth=1))
    assert pred.tree.num_nodes == 1
    assert pred.tree.value[0] == 1.0


def test_stump_attains_enumerated_optimum(rng):
    for _ in range(60):
        m = int(rng.integers(3, 13))
        d = int(rng.integers(1, 5))
        X = rng.random((m, d))
        w = rng.uniform(0.0, 2.0, m)
        labels = rng.choice([-1.0, 1.0], m)
        if np.sum(w) <= 0:
            continue
        best = classification_oracle_best_error(X, w, labels)
        pred = fit_classification_tree(
            ClassificationSamples(X, w, labels), TreeParams(max_depth=1)
        )
        preds = np.sign(pred.predict_rows(X))
        achieved = np.sum(w[preds != labels])
        assert abs(achieved - best) <= 1e-10


def test_classification_labels_must_be_pm1():
    s = ClassificationSamples(
        features=np.array([[0.0]]), weights=np.array([1.0]), labels=np.array([0.5])
    )
    with pytest.raises(ValueError, match="exactly"):
        fit_classification_tree(s, TreeParams(max_depth=1))


def test_classification_symmetry_negated_labels(rng):
    # continuous weights make tied leaves measure-zero, so the negated fit
    # must mirror structure and flip every leaf
    m = 16
    X = rng.random((m, 2))
    w = rng.uniform(0.1, 1.0, m)
    labels = rng.choice([-1.0, 1.0], m)
    p1 = fit_classification_tree(ClassificationSamples(X, w, labels), TreeParams(max_depth=2))
    p2 = fit_classification_tree(ClassificationSamples(X, w, -labels), TreeParams(max_depth=2))
    assert np.array_equal(p1.tree.feature, p2.tree.feature)
    assert np.array_equal(p1.tree.threshold, p2.tree.threshold, equal_nan=True)
    assert np.array_equal(p1.tree.value, -p2.tree.value)
