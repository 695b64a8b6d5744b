"""Feed-forward network with entity embeddings for categorical columns.

Each categorical column goes through its own embedding table; the
embeddings are concatenated with the standardized continuous columns and
passed through ReLU hidden layers to a two-way softmax.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from . import diffcore as dc
from .validation import check_binary_target, check_features


@dataclass
class DNNModel:
    cardinalities: list[int]
    n_continuous: int
    hidden: list[int]
    embeddings: list[dc.EmbeddingTable] = field(default_factory=list)
    layers: list[tuple[dc.Node, dc.Node]] = field(default_factory=list)

    @property
    def input_width(self) -> int:
        return sum(t.dim for t in self.embeddings) + self.n_continuous

    def parameters(self) -> list[dc.Node]:
        params = [t.weights for t in self.embeddings]
        for W, b in self.layers:
            params += [W, b]
        return params

    def forward(self, cat: np.ndarray, cont: np.ndarray) -> dc.Node:
        """Class probabilities, shape (batch, 2)."""
        parts = [dc.embed(t, cat[:, j]) for j, t in enumerate(self.embeddings)]
        if self.n_continuous:
            parts.append(dc.Node(cont))
        h = dc.concat(parts, axis=1) if len(parts) > 1 else parts[0]
        for W, b in self.layers[:-1]:
            h = dc.relu(dc.affine(h, W, b))
        W, b = self.layers[-1]
        return dc.softmax(dc.affine(h, W, b))

    def to_dict(self) -> dict:
        return {
            "cardinalities": self.cardinalities,
            "n_continuous": self.n_continuous,
            "hidden": self.hidden,
            "embeddings": [t.weights.value.tolist() for t in self.embeddings],
            "layers": [[W.value.tolist(), b.value.tolist()] for W, b in self.layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DNNModel":
        model = cls(list(d["cardinalities"]), int(d["n_continuous"]), list(d["hidden"]))
        for card, w in zip(model.cardinalities, d["embeddings"]):
            w = np.asarray(w, dtype=np.float64)
            table = dc.EmbeddingTable(card, w.shape[1])
            table.weights = dc.Node(w, requires_grad=True)
            model.embeddings.append(table)
        model.layers = [(dc.Node(W, requires_grad=True), dc.Node(b, requires_grad=True))
                        for W, b in d["layers"]]
        return model


def build_dnn(cardinalities, n_continuous: int, hidden=(200, 100), seed: int = 0,
              embedding_dims=None) -> DNNModel:
    """Wire embeddings, hidden layers and a 2-unit output with Glorot-uniform weights."""
    hidden = list(hidden)
    if not hidden:
        raise ValueError("hidden must list at least one layer size")
    rng = np.random.default_rng(seed)
    model = DNNModel(list(cardinalities), int(n_continuous), hidden)
    dims = embedding_dims or [None] * len(cardinalities)
    model.embeddings = [dc.EmbeddingTable(c, d, rng) for c, d in zip(cardinalities, dims)]
    sizes = [model.input_width] + hidden + [2]
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = dc.Node(dc.glorot_uniform(rng, fan_in, fan_out), requires_grad=True)
        b = dc.Node(np.zeros(fan_out), requires_grad=True)
        model.layers.append((W, b))
    return model


def train_dnn(model: DNNModel, cat, cont, y, valid=None, learning_rate=0.01, epochs=20,
              batch_size=256, seed=0) -> dict:
    """Mini-batch gradient descent on the mean cross-entropy.

    ``valid`` is an optional ``(cat, cont, y)`` triple. Returns a log with
    per-epoch mean training loss and validation accuracy.
    """
    n = len(y)
    if n == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(seed)
    params = model.parameters()
    log = {"train_loss": [], "valid_accuracy": []}
    for _ in range(epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            for p in params:
                p.zero_grad()
            loss = dc.cross_entropy(model.forward(cat[idx], cont[idx]), y[idx])
            dc.backward(loss)
            for p in params:
                p.value -= learning_rate * p.grad
            losses.append(float(loss.value) * len(idx))
        log["train_loss"].append(sum(losses) / n)
        if valid is not None:
            pred = predict_proba_dnn(model, valid[0], valid[1]).argmax(axis=1)
            log["valid_accuracy"].append(float(np.mean(pred == valid[2])))
    for p in params:
        p.zero_grad()
    return log


def predict_proba_dnn(model: DNNModel, cat, cont, batch_size: int = 4096) -> np.ndarray:
    if cat.shape[1] != len(model.embeddings) or cont.shape[1] != model.n_continuous:
        raise ValueError("input columns do not match the model's schema")
    chunks = [model.forward(cat[i:i + batch_size], cont[i:i + batch_size]).value
              for i in range(0, cat.shape[0], batch_size)]
    return np.vstack(chunks) if chunks else np.zeros((0, 2))


class EmbeddingMLPClassifier(ClassifierMixin, BaseEstimator):
    """Estimator wrapper around :func:`build_dnn` / :func:`train_dnn`.

    ``X`` holds category indices in its first ``len(cardinalities)`` columns
    and standardized continuous values in the rest.

    Parameters
    ----------
    cardinalities : list of int
        Slots per categorical column, unknown slot included.
    hidden : tuple of int, default=(200, 100)
    learning_rate : float, default=0.01
    epochs : int, default=20
    batch_size : int, default=256
    random_state : int, default=0
    """

    def __init__(self, cardinalities=(), hidden=(200, 100), learning_rate=0.01, epochs=20,
                 batch_size=256, random_state=0):
        self.cardinalities = cardinalities
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.random_state = random_state

    def _split(self, X):
        k = len(self.cardinalities)
        return X[:, :k].astype(np.int64), X[:, k:]

    def fit(self, X, y, X_valid=None, y_valid=None):
        X, y = check_features(X, y)
        y = check_binary_target(y)
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        cat, cont = self._split(X)
        self.model_ = build_dnn(self.cardinalities, cont.shape[1], self.hidden, self.random_state)
        valid = None
        if X_valid is not None:
            vc, vx = self._split(check_features(X_valid, n_features=self.n_features_in_))
            valid = (vc, vx, check_binary_target(y_valid))
        self.log_ = train_dnn(self.model_, cat, cont, y, valid, self.learning_rate, self.epochs,
                              self.batch_size, self.random_state)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = check_features(X, n_features=self.n_features_in_)
        return predict_proba_dnn(self.model_, *self._split(X))

    def predict(self, X):
        # ties go to class 0
        return np.argmax(self.predict_proba(X), axis=1).astype(np.int64)
