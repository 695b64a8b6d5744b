"""JSON round-tripping of fitted estimators.

An estimator is stored as its class name, its constructor parameters and
every public fitted attribute (names ending in ``_``). Arrays, trees and
network weights are tagged so they decode back to the original types.
"""

from __future__ import annotations

import numpy as np

from .baselines import LogisticRegression, MultinomialNB
from .bnn import BayesianMLPClassifier, BNNModel
from .dnn import DNNModel, EmbeddingMLPClassifier
from .trees import DecisionTreeClassifier, GradientBoostingClassifier, RandomForestClassifier, Tree

ESTIMATORS = {cls.__name__: cls for cls in (
    DecisionTreeClassifier, RandomForestClassifier, GradientBoostingClassifier,
    LogisticRegression, MultinomialNB, EmbeddingMLPClassifier, BayesianMLPClassifier,
)}

_TAGGED = {"tree": Tree, "dnn": DNNModel, "bnn": BNNModel}


def encode_value(v):
    if isinstance(v, np.ndarray):
        return {"__ndarray__": v.tolist(), "dtype": str(v.dtype)}
    if isinstance(v, np.generic):
        return v.item()
    for tag, cls in _TAGGED.items():
        if isinstance(v, cls):
            return {f"__{tag}__": v.to_dict()}
    if isinstance(v, (list, tuple)):
        return [encode_value(x) for x in v]
    if isinstance(v, dict):
        return {k: encode_value(x) for k, x in v.items()}
    return v


def decode_value(v):
    if isinstance(v, dict):
        if "__ndarray__" in v:
            return np.asarray(v["__ndarray__"], dtype=v["dtype"])
        for tag, cls in _TAGGED.items():
            if f"__{tag}__" in v:
                return cls.from_dict(v[f"__{tag}__"])
        return {k: decode_value(x) for k, x in v.items()}
    if isinstance(v, list):
        return [decode_value(x) for x in v]
    return v


def estimator_to_dict(est) -> dict:
    fitted = {k: encode_value(v) for k, v in vars(est).items()
              if k.endswith("_") and not k.startswith("_")}
    return {"class": type(est).__name__, "params": encode_value(est.get_params()),
            "state": fitted}


def estimator_from_dict(d: dict):
    try:
        cls = ESTIMATORS[d["class"]]
    except KeyError:
        raise ValueError(f"unknown estimator class {d.get('class')!r}") from None
    est = cls(**decode_value(d["params"]))
    for k, v in d["state"].items():
        setattr(est, k, decode_value(v))
    # a single tree is referenced from both attributes
    if isinstance(est, DecisionTreeClassifier) and hasattr(est, "tree_"):
        est.trees_ = [est.tree_]
    return est
