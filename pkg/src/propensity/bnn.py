"""Bayes-by-backprop network with a sampled posterior predictive.

Every weight and bias has a factorized Gaussian posterior ``N(mu, sigma^2)``
with ``sigma = softplus(rho)``. Training minimizes the cross-entropy of one
sampled network plus a weighted KL term to a ``N(0, prior_sigma^2)`` prior.
Prediction draws ``S`` weight sets; a class is chosen only when its median
probability exceeds the threshold, otherwise the instance is undecided.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import softmax as _softmax
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from . import diffcore as dc
from .metrics import UNDECIDED
from .validation import check_binary_target, check_features

# tag separating posterior-predictive noise streams from the training stream
_PREDICTIVE_STREAM = 0x5EED


def _softplus(x):
    return np.logaddexp(0.0, x)


class GaussianVariational:
    """Factorized Gaussian over one parameter tensor.

    Parameters
    ----------
    mu, rho : array_like
        Means and pre-softplus scales, same shape.
    """

    def __init__(self, mu, rho):
        mu = np.asarray(mu, dtype=np.float64)
        rho = np.asarray(rho, dtype=np.float64)
        if mu.shape != rho.shape:
            raise ValueError(f"mu {mu.shape} and rho {rho.shape} differ in shape")
        self.mu = dc.Node(mu, requires_grad=True)
        self.rho = dc.Node(rho, requires_grad=True)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.mu.shape

    @property
    def sigma(self) -> np.ndarray:
        return _softplus(self.rho.value)

    def sample(self, noise) -> np.ndarray:
        """Plain-array draw ``mu + sigma * noise`` (no graph)."""
        return self.mu.value + self.sigma * noise


def sample_weights(layer: GaussianVariational, noise) -> dc.Node:
    """Reparameterized draw ``mu + softplus(rho) * noise``, differentiable in mu and rho."""
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != layer.shape:
        raise ValueError(f"noise shape {noise.shape} != parameter shape {layer.shape}")
    return dc.add(layer.mu, dc.mul(dc.softplus(layer.rho), dc.Node(noise)))


def kl_gaussian(q, prior_sigma: float = 1.0) -> dc.Node:
    """Closed-form ``KL(q || N(0, prior_sigma^2))`` summed over parameters.

    ``q`` is one :class:`GaussianVariational` or an iterable of them.
    """
    qs = [q] if isinstance(q, GaussianVariational) else list(q)
    return _kl(qs, [dc.softplus(g.rho) for g in qs], prior_sigma)


def _kl(qs, sigmas, prior_sigma):
    if prior_sigma <= 0:
        raise ValueError("prior_sigma must be positive")
    inv = 1.0 / (2.0 * prior_sigma ** 2)
    out = None
    for g, sig in zip(qs, sigmas):
        quad = dc.scale(dc.add(dc.square(sig), dc.square(g.mu)), inv)
        t = dc.total(dc.add(quad, dc.scale(dc.log(sig), -1.0)))
        t = dc.add(t, dc.Node(g.mu.value.size * (math.log(prior_sigma) - 0.5)))
        out = t if out is None else dc.add(out, t)
    return out


@dataclass
class BNNModel:
    """One-hidden-layer ReLU network with variational weights and biases."""

    n_inputs: int
    hidden: int = 1024
    prior_sigma: float = 1.0
    layers: list[tuple[GaussianVariational, GaussianVariational]] = field(default_factory=list)

    def variationals(self) -> list[GaussianVariational]:
        return [g for pair in self.layers for g in pair]

    def parameters(self) -> list[dc.Node]:
        return [n for g in self.variationals() for n in (g.mu, g.rho)]

    def draw_noise(self, rng: np.random.Generator) -> list[np.ndarray]:
        return [rng.standard_normal(g.shape) for g in self.variationals()]

    def forward(self, X, noise, sigmas=None) -> dc.Node:
        """Class probabilities under the weight sample given by ``noise``.

        ``sigmas`` optionally supplies precomputed ``softplus(rho)`` nodes.
        """
        gs = self.variationals()
        if sigmas is None:
            sigmas = [dc.softplus(g.rho) for g in gs]
        ws = []
        for g, sig, e in zip(gs, sigmas, noise):
            e = np.asarray(e, dtype=np.float64)
            if e.shape != g.shape:
                raise ValueError(f"noise shape {e.shape} != parameter shape {g.shape}")
            ws.append(dc.add(g.mu, dc.mul(sig, dc.Node(e))))
        h = dc.Node(X)
        for i in range(len(self.layers)):
            h = dc.affine(h, ws[2 * i], ws[2 * i + 1])
            if i < len(self.layers) - 1:
                h = dc.relu(h)
        return dc.softmax(h)

    def forward_values(self, X, noise=None) -> np.ndarray:
        """Plain-array forward pass; ``noise=None`` uses the posterior means."""
        h = X
        gs = self.variationals()
        ws = [g.mu.value for g in gs] if noise is None else [g.sample(e) for g, e in zip(gs, noise)]
        for i in range(len(self.layers)):
            h = h @ ws[2 * i] + ws[2 * i + 1]
            if i < len(self.layers) - 1:
                h = np.maximum(h, 0.0)
        return _softmax(h, axis=1)

    def to_dict(self) -> dict:
        return {
            "n_inputs": self.n_inputs,
            "hidden": self.hidden,
            "prior_sigma": self.prior_sigma,
            "layers": [[[g.mu.value.tolist(), g.rho.value.tolist()] for g in pair]
                       for pair in self.layers],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BNNModel":
        model = cls(int(d["n_inputs"]), int(d["hidden"]), float(d["prior_sigma"]))
        model.layers = [tuple(GaussianVariational(mu, rho) for mu, rho in pair)
                        for pair in d["layers"]]
        return model


def build_bnn(n_inputs: int, hidden: int = 1024, prior_sigma: float = 1.0,
              rho_init: float = -5.0, seed: int = 0) -> BNNModel:
    """Glorot-uniform weight means, zero bias means, constant ``rho_init``."""
    if n_inputs < 1 or hidden < 1:
        raise ValueError("n_inputs and hidden must be positive")
    rng = np.random.default_rng(seed)
    model = BNNModel(int(n_inputs), int(hidden), float(prior_sigma))
    for fan_in, fan_out in ((n_inputs, hidden), (hidden, 2)):
        W = GaussianVariational(dc.glorot_uniform(rng, fan_in, fan_out),
                                np.full((fan_in, fan_out), rho_init))
        b = GaussianVariational(np.zeros(fan_out), np.full(fan_out, rho_init))
        model.layers.append((W, b))
    return model


def elbo_loss(model: BNNModel, X, y, kl_weight: float, noise=None, rng=None) -> dc.Node:
    """Sampled-network cross-entropy plus ``kl_weight`` times the total KL.

    Pass ``noise`` (one standard-normal array per parameter tensor) to freeze
    the weight sample; otherwise it is drawn from ``rng``.
    """
    if kl_weight < 0:
        raise ValueError("kl_weight must be nonnegative")
    if len(y) == 0:
        raise ValueError("empty batch")
    if noise is None:
        noise = model.draw_noise(np.random.default_rng(rng))
    gs = model.variationals()
    sigmas = [dc.softplus(g.rho) for g in gs]
    nll = dc.cross_entropy(model.forward(X, noise, sigmas), y)
    if kl_weight == 0:
        return nll
    return dc.add(nll, dc.scale(_kl(gs, sigmas, model.prior_sigma), kl_weight))


def train_bnn(model: BNNModel, X, y, valid=None, learning_rate=0.05, epochs=30, batch_size=256,
              kl_weight=None, seed=0) -> dict:
    """Mini-batch gradient descent on all ``mu`` and ``rho``.

    ``kl_weight`` defaults to one over the number of mini-batches per epoch.
    ``valid`` is an optional ``(X, y)`` pair scored by posterior-mean
    argmax after each epoch.
    """
    n = len(y)
    if n == 0:
        raise ValueError("empty training set")
    n_batches = math.ceil(n / batch_size)
    if kl_weight is None:
        kl_weight = 1.0 / n_batches
    rng = np.random.default_rng(seed)
    params = model.parameters()
    log = {"elbo": [], "valid_accuracy": [], "kl_weight": kl_weight}
    for _ in range(epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            for p in params:
                p.zero_grad()
            loss = elbo_loss(model, X[idx], y[idx], kl_weight, noise=model.draw_noise(rng))
            dc.backward(loss)
            for p in params:
                p.value -= learning_rate * p.grad
            losses.append(float(loss.value))
        log["elbo"].append(float(np.mean(losses)))
        if valid is not None:
            pred = model.forward_values(valid[0]).argmax(axis=1)
            log["valid_accuracy"].append(float(np.mean(pred == valid[1])))
    for p in params:
        p.zero_grad()
    return log


@dataclass
class PosteriorPredictive:
    """Class-probability samples, shape ``(n_instances, S, 2)``."""

    samples: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def median(self) -> np.ndarray:
        return np.median(self.samples, axis=1)

    @property
    def std(self) -> np.ndarray:
        ddof = 1 if self.n_samples > 1 else 0
        return self.samples.std(axis=1, ddof=ddof)

    @property
    def spread(self) -> np.ndarray:
        """Largest per-class sample standard deviation of each instance."""
        return self.std.max(axis=1)

    def __len__(self) -> int:
        return self.samples.shape[0]


def posterior_predictive(model: BNNModel, X, S: int = 100, seed: int = 0,
                         n_jobs=None) -> PosteriorPredictive:
    """Run ``S`` forward passes, each with a fresh weight sample.

    Sample ``s`` draws its noise from a stream keyed by ``(seed, s)``, so the
    result does not depend on evaluation order or ``n_jobs``.
    """
    if S < 1:
        raise ValueError("S must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_inputs:
        raise ValueError(f"expected {model.n_inputs} input columns, got shape {X.shape}")

    def one(s):
        rng = np.random.default_rng([seed, _PREDICTIVE_STREAM, s])
        return model.forward_values(X, model.draw_noise(rng))

    if n_jobs in (None, 1):
        draws = [one(s) for s in range(S)]
    else:
        from joblib import Parallel, delayed
        draws = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(one)(s) for s in range(S))
    return PosteriorPredictive(np.stack(draws, axis=1))


@dataclass
class Decision:
    """Per-instance outcome (0, 1 or ``UNDECIDED``), chosen-class median and spread.

    For undecided instances ``probability`` holds the larger median.
    """

    outcome: np.ndarray
    probability: np.ndarray
    spread: np.ndarray

    @property
    def decided(self) -> np.ndarray:
        return self.outcome != UNDECIDED

    @property
    def undecided_rate(self) -> float:
        return float(np.mean(~self.decided)) if len(self.outcome) else 0.0


def decide(pp: PosteriorPredictive, tau: float = 0.5) -> Decision:
    """Pick the class with the largest median if that median exceeds ``tau``."""
    if not 0 < tau < 1:
        raise ValueError("tau must lie in (0, 1)")
    med = pp.median
    k = np.argmax(med, axis=1)  # ties go to class 0
    best = med[np.arange(len(k)), k]
    outcome = np.where(best > tau, k, UNDECIDED).astype(np.int64)
    return Decision(outcome, best, pp.spread)


@dataclass
class Histogram:
    instance: int
    label: int
    edges: np.ndarray
    counts: np.ndarray
    decided: bool


def histogram_report(pp: PosteriorPredictive, bins: int = 30,
                     decision: Decision | None = None) -> list[Histogram]:
    """Per instance and class, bin natural-log probabilities over ``[min, 0]``.

    When every sample sits at probability 1 the histogram is a single bin
    at 0. ``decided`` marks the class chosen by ``decision``.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    logp = np.log(np.clip(pp.samples, dc.LOG_CLAMP, 1.0))
    outcome = decision.outcome if decision is not None else np.full(len(pp), UNDECIDED)
    out = []
    for i in range(len(pp)):
        for k in (0, 1):
            v = logp[i, :, k]
            lo = float(v.min())
            if lo == 0.0:
                edges, counts = np.array([0.0, 0.0]), np.array([v.size])
            else:
                counts, edges = np.histogram(v, bins=bins, range=(lo, 0.0))
            out.append(Histogram(i, k, edges, counts, bool(outcome[i] == k)))
    return out


class BayesianMLPClassifier(ClassifierMixin, BaseEstimator):
    """Estimator wrapper: ``predict`` returns 0, 1 or ``UNDECIDED`` (-1).

    Parameters
    ----------
    hidden : int, default=1024
    prior_sigma : float, default=1.0
    n_samples : int, default=100
        Posterior samples ``S`` drawn at prediction time.
    threshold : float, default=0.5
        Median probability a class must exceed to be chosen.
    learning_rate : float, default=0.05
    epochs : int, default=30
    batch_size : int, default=256
    kl_weight : float or None, default=None
        None means one over the number of mini-batches.
    rho_init : float, default=-5.0
    random_state : int, default=0
    """

    def __init__(self, hidden=1024, prior_sigma=1.0, n_samples=100, threshold=0.5,
                 learning_rate=0.05, epochs=30, batch_size=256, kl_weight=None,
                 rho_init=-5.0, random_state=0):
        self.hidden = hidden
        self.prior_sigma = prior_sigma
        self.n_samples = n_samples
        self.threshold = threshold
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.kl_weight = kl_weight
        self.rho_init = rho_init
        self.random_state = random_state

    def fit(self, X, y, X_valid=None, y_valid=None):
        X, y = check_features(X, y)
        y = check_binary_target(y)
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        self.model_ = build_bnn(X.shape[1], self.hidden, self.prior_sigma, self.rho_init,
                                self.random_state)
        valid = None
        if X_valid is not None:
            valid = (check_features(X_valid, n_features=X.shape[1]), check_binary_target(y_valid))
        self.log_ = train_bnn(self.model_, X, y, valid, self.learning_rate, self.epochs,
                              self.batch_size, self.kl_weight, self.random_state)
        return self

    def posterior_predictive(self, X, S=None) -> PosteriorPredictive:
        check_is_fitted(self, "model_")
        X = check_features(X, n_features=self.n_features_in_)
        return posterior_predictive(self.model_, X, S or self.n_samples, self.random_state)

    def decide(self, X, threshold=None) -> Decision:
        return decide(self.posterior_predictive(X), threshold or self.threshold)

    def predict_proba(self, X):
        """Per-class median probabilities (rows need not sum to 1)."""
        return self.posterior_predictive(X).median

    def predict(self, X):
        return self.decide(X).outcome
