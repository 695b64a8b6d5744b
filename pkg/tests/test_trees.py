import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_gini_splits, enumerate_multisets, rows_from_counts
from propensity.trees import (DecisionTreeClassifier, GradientBoostingClassifier,
                              RandomForestClassifier, Tree, best_split, feature_importance,
                              find_split, grow_tree, impurity)


def test_impurity_examples():
    assert impurity([4, 0], "gini") == 0.0
    assert impurity([4, 0], "entropy") == 0.0
    assert impurity([2, 2], "gini") == pytest.approx(0.5)
    assert impurity([2, 2], "entropy") == pytest.approx(1.0)
    with pytest.raises(ValueError):
        impurity([0, 0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=2, max_size=2).filter(lambda c: sum(c) > 0))
def test_gini_in_unit_interval(counts):
    assert 0.0 <= impurity(counts, "gini") <= 1.0


def test_weighted_gini_hand_example():
    # branches {1,1} and {0,1}: 0.5 * 0 + 0.5 * 0.5
    X = np.array([[0.0], [0.0], [1.0], [1.0]])
    y = np.array([1, 1, 0, 1])
    s = best_split(X, y, 0, "gini")
    assert s.weighted_impurity == pytest.approx(0.25)
    assert s.threshold == 0.5


def test_separating_feature_gain_equals_parent():
    X = np.array([[3.0, 0.0], [1.0, 1.0], [4.0, 0.0], [2.0, 1.0]])
    y = np.array([0, 1, 0, 1])
    s = find_split(X, y)
    assert s.gain == pytest.approx(0.5)
    assert s.weighted_impurity == 0.0
    # both features separate perfectly: the lower index wins
    assert (s.feature, s.threshold) == (0, 2.5)


def test_constant_feature_has_no_split():
    assert best_split(np.ones((4, 1)), np.array([0, 1, 0, 1]), 0) is None


def test_best_split_needs_two_rows():
    with pytest.raises(ValueError):
        best_split(np.ones((1, 1)), np.array([1]), 0)


def test_categorical_one_vs_rest():
    X = np.array([[1.0], [2.0], [3.0], [2.0], [1.0], [3.0]])
    y = np.array([0, 1, 0, 1, 0, 0])
    s = best_split(X, y, 0, categorical=True)
    assert s.categorical and s.threshold == 2.0
    assert s.weighted_impurity == 0.0


def test_small_exhaustive_oracle():
    counts = enumerate_multisets(max_rows=4)
    feature, weighted = brute_force_gini_splits(counts)
    for c, f, w in zip(counts, feature, weighted):
        s = find_split(*rows_from_counts(c))
        if f < 0:
            assert s is None
        else:
            assert (s.feature, s.threshold) == (f, 0.5)
            assert s.weighted_impurity == pytest.approx(w, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_split_invariant_to_row_order(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    X = rng.integers(0, 2, (n, 3)).astype(float)
    y = rng.integers(0, 2, n)
    perm = rng.permutation(n)
    a, b = find_split(X, y), find_split(X[perm], y[perm])
    assert (a is None) == (b is None)
    if a is not None:
        assert (a.feature, a.threshold) == (b.feature, b.threshold)
        assert a.weighted_impurity == pytest.approx(b.weighted_impurity, abs=1e-12)


def test_pure_input_is_single_leaf():
    tree = grow_tree(np.random.default_rng(0).normal(size=(10, 2)), np.ones(10, dtype=int))
    assert tree.node_count == 1


def test_xor_depth_two():
    # unequal multiplicities give the root split positive gain; perfectly
    # balanced XOR has zero gain everywhere and stays a single leaf
    X = np.array([[0, 0]] * 3 + [[0, 1], [1, 0], [1, 1]], dtype=float)
    y = np.array([0, 0, 0, 1, 1, 0])
    clf = DecisionTreeClassifier(criterion="gini", max_depth=2).fit(X, y)
    assert np.mean(clf.predict(X) == y) == 1.0


def test_balanced_xor_stops_at_zero_gain():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    assert grow_tree(X, np.array([0, 1, 1, 0]), "gini", 2).node_count == 1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 5))
def test_depth_and_leaf_size_respected(seed, max_depth, min_leaf):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(80, 3))
    y = rng.integers(0, 2, 80)
    tree = grow_tree(X, y, "entropy", max_depth, min_leaf)
    assert tree.max_depth <= max_depth
    leaves = [i for i in range(tree.node_count) if tree.left[i] < 0]
    assert min(tree.n_samples[i] for i in leaves) >= min_leaf
    assert all(g >= 0 for g in tree.gain)


def test_memorizes_training_rows_when_unbounded():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(50, 2))
    y = rng.integers(0, 2, 50)
    clf = DecisionTreeClassifier(max_depth=None).fit(X, y)
    np.testing.assert_array_equal(clf.predict(X), y)


def test_unknown_category_takes_majority_branch():
    # category 1 -> left (3 rows) vs the rest (7 rows)
    X = np.array([[1.0]] * 3 + [[2.0]] * 7)
    y = np.array([0] * 3 + [1] * 7)
    clf = DecisionTreeClassifier(categorical_features=[0], max_depth=1).fit(X, y)
    assert clf.predict(np.array([[0.0]]))[0] == 1


def test_forest_vote_tie_goes_to_zero():
    X = np.array([[0.0], [1.0]])
    y = np.array([0, 1])
    rf = RandomForestClassifier(n_estimators=2, bootstrap=False).fit(X, y)
    # make the two trees disagree on every row
    rf.trees_[1] = Tree.from_dict(rf.trees_[0].to_dict())
    rf.trees_[1].value = [[1 - v[0], 1 - v[1]] for v in rf.trees_[1].value]
    rf.trees_[1]._cache = None
    np.testing.assert_array_equal(rf.predict(X), [0, 0])


def test_forest_majority_vote():
    X = np.array([[0.0], [1.0]])
    rf = RandomForestClassifier(n_estimators=3, bootstrap=False).fit(X, np.array([0, 1]))
    flipped = Tree.from_dict(rf.trees_[0].to_dict())
    flipped.value = [[1 - v[0], 1 - v[1]] for v in flipped.value]
    rf.trees_[2] = flipped  # votes per row: {0,0,1} and {1,1,0}
    np.testing.assert_array_equal(rf.predict(X), [0, 1])


def test_forest_single_tree_without_bootstrap_equals_tree():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(300, 4))
    y = (X[:, 0] + rng.normal(scale=0.5, size=300) > 0).astype(int)
    tree = DecisionTreeClassifier(criterion="gini", max_depth=5).fit(X, y)
    rf = RandomForestClassifier(n_estimators=1, bootstrap=False, max_depth=5).fit(X, y)
    Xt = rng.normal(size=(500, 4))
    np.testing.assert_array_equal(rf.predict(Xt), tree.predict(Xt))


def test_forest_seed_determinism_independent_of_jobs():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(200, 3))
    y = rng.integers(0, 2, 200)
    a = RandomForestClassifier(n_estimators=6, random_state=7, n_jobs=1).fit(X, y)
    b = RandomForestClassifier(n_estimators=6, random_state=7, n_jobs=2).fit(X, y)
    np.testing.assert_array_equal(a.predict_proba(X), b.predict_proba(X))


def test_gbm_initial_value():
    X = np.zeros((4, 1))
    gbm = GradientBoostingClassifier(n_estimators=1, loss="squared").fit(X, np.array([0, 1, 1, 1]))
    assert gbm.init_ == 0.75


def test_gbm_single_stump_closed_form():
    X = np.array([[0.0], [0.0], [1.0], [1.0]])
    y = np.array([0, 1, 1, 1])
    gbm = GradientBoostingClassifier(n_estimators=1, learning_rate=1.0, max_depth=1,
                                     loss="squared").fit(X, y)
    # F0 = 0.75; residuals (-0.75, 0.25 | 0.25, 0.25); leaf means -0.25 and 0.25
    np.testing.assert_allclose(gbm.decision_function(X), [0.5, 0.5, 1.0, 1.0], atol=1e-15)


def test_gbm_zero_learning_rate_predicts_init():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 2))
    y = rng.integers(0, 2, 50)
    gbm = GradientBoostingClassifier(n_estimators=5, learning_rate=0.0, loss="squared").fit(X, y)
    np.testing.assert_allclose(gbm.decision_function(X), y.mean())


@pytest.mark.parametrize("loss", ["squared", "logistic"])
def test_gbm_training_loss_non_increasing(loss):
    rng = np.random.default_rng(5)
    X = rng.normal(size=(400, 3))
    y = (X[:, 0] - X[:, 1] + rng.normal(size=400) > 0).astype(int)
    gbm = GradientBoostingClassifier(n_estimators=40, max_depth=3, loss=loss).fit(X, y)
    assert len(gbm.train_loss_) == 41
    if loss == "squared":
        assert np.all(np.diff(gbm.train_loss_) <= 1e-12)
    else:
        assert gbm.train_loss_[-1] < gbm.train_loss_[0]


def test_single_split_importance_is_one():
    X = np.array([[0.0, 5.0], [1.0, 5.0]])
    clf = DecisionTreeClassifier(max_depth=1).fit(X, np.array([0, 1]))
    np.testing.assert_array_equal(clf.feature_importances_, [1.0, 0.0])


def test_importance_identifies_driving_feature():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(600, 4))
    y = (X[:, 2] > 0.1).astype(int)
    for model in (DecisionTreeClassifier(), RandomForestClassifier(n_estimators=10),
                  GradientBoostingClassifier(n_estimators=10)):
        imp = feature_importance(model.fit(X, y))
        assert imp.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(imp >= 0)
        assert np.argmax(imp) == 2


def test_tree_serialization_round_trip():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(100, 3))
    y = rng.integers(0, 2, 100)
    tree = grow_tree(X, y, "gini", 4)
    back = Tree.from_dict(tree.to_dict())
    np.testing.assert_array_equal(back.predict_value(X), tree.predict_value(X))
