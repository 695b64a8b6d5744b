"""L2 logistic regression and multinomial naive Bayes."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .validation import check_binary_target, check_features


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


class LogisticRegression(ClassifierMixin, BaseEstimator):
    """Binary logistic regression fit by gradient descent with backtracking.

    Minimizes ``mean NLL + ||w||^2 / (2 C n)``; the intercept is not
    penalized. Each iteration starts from twice the previous accepted step
    (capped at ``step``) and halves it until the Armijo condition holds, so
    the objective never increases. Iteration stops after ``max_iter`` steps
    or once the gradient norm drops below ``tol``.

    Parameters
    ----------
    C : float, default=1.0
        Inverse regularization strength; ``np.inf`` disables the penalty.
    max_iter : int, default=100
    tol : float, default=1e-4
    fit_intercept : bool, default=True
    step : float, default=1.0
        Largest step tried.
    """

    def __init__(self, C=1.0, max_iter=100, tol=1e-4, fit_intercept=True, step=1.0):
        self.C = C
        self.max_iter = max_iter
        self.tol = tol
        self.fit_intercept = fit_intercept
        self.step = step

    def _objective(self, w, b, X, y):
        z = X @ w + b
        nll = np.mean(np.logaddexp(0.0, z) - y * z)
        return nll + self._penalty(X.shape[0]) * (w @ w)

    def _penalty(self, n):
        return 0.0 if np.isinf(self.C) else 1.0 / (2.0 * self.C * n)

    def fit(self, X, y):
        X, y = check_features(X, y)
        y = check_binary_target(y).astype(np.float64)
        if X.shape[0] == 0:
            raise ValueError("empty training data")
        if self.C <= 0:
            raise ValueError("C must be positive")
        n, d = X.shape
        self.n_features_in_ = d
        self.classes_ = np.array([0, 1])
        lam = self._penalty(n)
        w, b = np.zeros(d), 0.0
        obj = self._objective(w, b, X, y)
        self.objective_path_ = [obj]
        step = self.step
        self.n_iter_ = 0
        for _ in range(self.max_iter):
            r = _sigmoid(X @ w + b) - y
            gw = X.T @ r / n + 2 * lam * w
            gb = r.mean() if self.fit_intercept else 0.0
            gnorm2 = gw @ gw + gb * gb
            if np.sqrt(gnorm2) < self.tol:
                break
            while True:
                w_new, b_new = w - step * gw, b - step * gb
                new_obj = self._objective(w_new, b_new, X, y)
                if new_obj <= obj - 0.5 * step * gnorm2 or step < 1e-12:
                    break
                step /= 2
            if new_obj > obj:
                break
            w, b, obj = w_new, b_new, new_obj
            self.objective_path_.append(obj)
            self.n_iter_ += 1
            step = min(2 * step, self.step)
        self.coef_, self.intercept_ = w, float(b)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_features(X, n_features=self.n_features_in_)
        return X @ self.coef_ + self.intercept_

    def predict_proba(self, X):
        p1 = _sigmoid(self.decision_function(X))
        return np.column_stack([1 - p1, p1])

    def predict(self, X):
        return (self.decision_function(X) > 0).astype(np.int64)


class MultinomialNB(ClassifierMixin, BaseEstimator):
    """Multinomial naive Bayes on nonnegative count features.

    Smoothed likelihoods are ``(count(f, c) + alpha) / (sum_f count(f, c) +
    alpha * n_features)``; the posterior is evaluated in log space.

    Parameters
    ----------
    alpha : float, default=0.05
    fit_prior : bool, default=True
        Use empirical class frequencies; otherwise uniform priors.
    """

    def __init__(self, alpha=0.05, fit_prior=True):
        self.alpha = alpha
        self.fit_prior = fit_prior

    def fit(self, X, y):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        X, y = check_features(X, y)
        y = check_binary_target(y)
        if np.any(X < 0):
            raise ValueError("MultinomialNB needs nonnegative features")
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        self.feature_count_ = np.vstack([X[y == k].sum(axis=0) for k in (0, 1)])
        self.class_count_ = np.bincount(y, minlength=2).astype(float)
        smoothed = self.feature_count_ + self.alpha
        self.feature_log_prob_ = np.log(smoothed) - np.log(smoothed.sum(axis=1, keepdims=True))
        if self.fit_prior:
            with np.errstate(divide="ignore"):
                self.class_log_prior_ = np.log(self.class_count_ / self.class_count_.sum())
        else:
            self.class_log_prior_ = np.full(2, -np.log(2))
        return self

    def predict_log_proba(self, X):
        check_is_fitted(self, "feature_log_prob_")
        X = check_features(X, n_features=self.n_features_in_)
        joint = X @ self.feature_log_prob_.T + self.class_log_prior_
        return joint - logsumexp(joint, axis=1, keepdims=True)

    def predict_proba(self, X):
        return np.exp(self.predict_log_proba(X))

    def predict(self, X):
        # ties go to class 0
        return np.argmax(self.predict_log_proba(X), axis=1).astype(np.int64)
