"""Input checks shared by the estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, check_X_y


def check_features(X, y=None, n_features: int | None = None):
    """Validate a finite 2-D float matrix (and a matching ``y`` when given).

    Returns ``X`` or ``(X, y)``. ``n_features`` enforces the width seen at fit.
    """
    if y is None:
        X = check_array(X, dtype=np.float64)
    else:
        X, y = check_X_y(X, y, dtype=np.float64)
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"X has {X.shape[1]} features, expected {n_features}")
    return X if y is None else (X, y)


def check_binary_target(y) -> np.ndarray:
    y = np.asarray(y)
    values = np.unique(y)
    if not np.isin(values, [0, 1]).all():
        raise ValueError(f"labels must be 0/1, got {values.tolist()}")
    return y.astype(np.int64)
