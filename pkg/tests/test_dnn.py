import numpy as np
import pytest

from propensity import diffcore as dc
from propensity.dnn import (DNNModel, EmbeddingMLPClassifier, build_dnn, predict_proba_dnn,
                            train_dnn)


def test_input_width_and_parameter_shapes():
    model = build_dnn([4, 4, 4], 2, hidden=[200, 100])
    assert [t.dim for t in model.embeddings] == [2, 2, 2]
    assert model.input_width == 8
    assert [W.value.shape for W, _ in model.layers] == [(8, 200), (200, 100), (100, 2)]


def test_empty_hidden_rejected():
    with pytest.raises(ValueError):
        build_dnn([3], 1, hidden=[])


def test_same_seed_same_initialization():
    a, b = build_dnn([5, 3], 2, seed=4), build_dnn([5, 3], 2, seed=4)
    for p, q in zip(a.parameters(), b.parameters()):
        np.testing.assert_array_equal(p.value, q.value)


def test_zero_output_layer_is_uniform():
    model = build_dnn([5], 3, hidden=[7], seed=1)
    W, b = model.layers[-1]
    W.value[:] = 0.0
    rng = np.random.default_rng(0)
    p = predict_proba_dnn(model, rng.integers(0, 5, (10, 1)), rng.normal(size=(10, 3)))
    np.testing.assert_array_equal(p, 0.5)


def test_probabilities_sum_to_one_and_width_checked():
    model = build_dnn([5, 2], 3, hidden=[16, 8])
    rng = np.random.default_rng(0)
    cat = np.column_stack([rng.integers(0, 5, 50), rng.integers(0, 2, 50)])
    p = predict_proba_dnn(model, cat, rng.normal(size=(50, 3)))
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        predict_proba_dnn(model, cat[:, :1], rng.normal(size=(50, 3)))


def test_full_network_gradient_matches_finite_differences():
    model = build_dnn([4, 3], 2, hidden=[5, 3], seed=2)
    rng = np.random.default_rng(3)
    cat = np.column_stack([rng.integers(0, 4, 6), rng.integers(0, 3, 6)])
    cont = rng.normal(size=(6, 2))
    y = rng.integers(0, 2, 6)
    # move biases off zero so no ReLU sits exactly on its kink
    for _, b in model.layers:
        b.value += rng.normal(scale=0.1, size=b.value.shape)
    err = dc.finite_diff_check(lambda: dc.cross_entropy(model.forward(cat, cont), y),
                               model.parameters())
    assert err < 1e-5


def test_zero_learning_rate_changes_nothing(small_split):
    train, _ = small_split
    model = build_dnn(train.encoder.cardinalities_, train.cont.shape[1], hidden=[16], seed=0)
    before = [p.value.copy() for p in model.parameters()]
    log = train_dnn(model, train.cat, train.cont, train.y, learning_rate=0.0, epochs=3)
    for p, v in zip(model.parameters(), before):
        np.testing.assert_array_equal(p.value, v)
    assert log["train_loss"][0] == pytest.approx(log["train_loss"][-1], rel=1e-12)


def test_empty_training_set_rejected():
    model = build_dnn([3], 1, hidden=[4])
    with pytest.raises(ValueError):
        train_dnn(model, np.zeros((0, 1), dtype=int), np.zeros((0, 1)), np.zeros(0, dtype=int))


def test_learns_separable_data(separable_split):
    train, test = separable_split
    model = build_dnn(train.encoder.cardinalities_, train.cont.shape[1], seed=0)
    # about 1800 rows: batches of 32 give enough steps in 20 epochs
    log = train_dnn(model, train.cat, train.cont, train.y,
                    valid=(test.cat, test.cont, test.y), epochs=20, batch_size=32)
    assert log["train_loss"][4] < log["train_loss"][0]
    assert log["valid_accuracy"][-1] >= 0.95


def test_estimator_round_trip_and_determinism(small_split):
    train, test = small_split
    params = dict(cardinalities=train.encoder.cardinalities_, hidden=(32, 16), epochs=2)
    a = EmbeddingMLPClassifier(**params).fit(train.X, train.y)
    b = EmbeddingMLPClassifier(**params).fit(train.X, train.y)
    np.testing.assert_array_equal(a.predict_proba(test.X), b.predict_proba(test.X))
    back = DNNModel.from_dict(a.model_.to_dict())
    k = len(train.encoder.cardinalities_)
    np.testing.assert_array_equal(
        predict_proba_dnn(back, test.X[:, :k].astype(int), test.X[:, k:]),
        a.predict_proba(test.X))
