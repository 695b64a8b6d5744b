"""Binary classification measures built from confusion counts and scores.

Predictions equal to :data:`UNDECIDED` (``-1``) are abstentions: they are
left out of the confusion matrix and counted separately.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

UNDECIDED = -1


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int
    abstained: int = 0

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn", "abstained"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def abstention_rate(self) -> float:
        seen = self.total + self.abstained
        return self.abstained / seen if seen else 0.0

    def swapped(self) -> "ConfusionMatrix":
        """The same counts with class 0 treated as the positive class."""
        return ConfusionMatrix(tp=self.tn, tn=self.tp, fp=self.fn, fn=self.fp,
                               abstained=self.abstained)


@dataclass
class MetricsReport:
    """Scores derived from one confusion matrix (and optionally scores).

    Metrics whose denominator is zero are stored as ``nan`` and listed in
    ``undefined``.
    """

    confusion: ConfusionMatrix
    accuracy: float
    precision: float
    recall: float
    f1: float
    kappa: float
    auc: float = math.nan
    undefined: list[str] = field(default_factory=list)
    classwise: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["abstention_rate"] = self.confusion.abstention_rate
        return out

    def to_json(self) -> str:
        def clean(x):
            if isinstance(x, float) and math.isnan(x):
                return None
            if isinstance(x, dict):
                return {k: clean(v) for k, v in x.items()}
            if isinstance(x, list):
                return [clean(v) for v in x]
            return x

        return json.dumps(clean(self.to_dict()), indent=2)


def _check_binary(y, name: str, allow_undecided: bool = False) -> np.ndarray:
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    allowed = {0, 1, UNDECIDED} if allow_undecided else {0, 1}
    values = set(np.unique(arr).tolist())
    if not values <= allowed:
        raise ValueError(f"{name} contains non-binary labels: {sorted(values - allowed)}")
    return arr.astype(np.int64)


def confusion(y_true, y_pred) -> ConfusionMatrix:
    """Count TP/TN/FP/FN with class 1 as positive; undecided predictions are tallied apart."""
    yt = _check_binary(y_true, "y_true")
    yp = _check_binary(y_pred, "y_pred", allow_undecided=True)
    if yt.shape != yp.shape:
        raise ValueError(f"length mismatch: {yt.shape[0]} vs {yp.shape[0]}")
    decided = yp != UNDECIDED
    yt, yp = yt[decided], yp[decided]
    return ConfusionMatrix(
        tp=int(np.sum((yp == 1) & (yt == 1))),
        tn=int(np.sum((yp == 0) & (yt == 0))),
        fp=int(np.sum((yp == 1) & (yt == 0))),
        fn=int(np.sum((yp == 0) & (yt == 1))),
        abstained=int(np.sum(~decided)),
    )


def _ratio(num: float, den: float) -> float:
    return num / den if den else math.nan


def basic_metrics(cm: ConfusionMatrix) -> tuple[float, float, float, float]:
    """Accuracy, precision, recall and F1 (harmonic mean); ``nan`` when undefined."""
    accuracy = _ratio(cm.tp + cm.tn, cm.total)
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    if math.isnan(precision) or math.isnan(recall):
        f1 = math.nan
    else:
        f1 = _ratio(2 * precision * recall, precision + recall)
    return accuracy, precision, recall, f1


def cohen_kappa(cm: ConfusionMatrix) -> float:
    """Chance-corrected agreement ``(OA - AC) / (1 - AC)``.

    ``AC`` sums, over both classes, the product of predicted and actual class
    rates. Returns ``nan`` when ``AC == 1`` or there are no instances.
    """
    n = cm.total
    if n == 0:
        return math.nan
    observed = (cm.tp + cm.tn) / n
    pred_pos, actual_pos = (cm.tp + cm.fp) / n, (cm.tp + cm.fn) / n
    chance = pred_pos * actual_pos + (1 - pred_pos) * (1 - actual_pos)
    if chance == 1:
        return math.nan
    return (observed - chance) / (1 - chance)


def roc_auc(y_true, scores) -> float:
    """Trapezoidal area under the ROC curve over every distinct score threshold."""
    yt = _check_binary(y_true, "y_true")
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != yt.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(yt.sum())
    n_neg = yt.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes present")
    order = np.argsort(-s, kind="mergesort")
    s_sorted, y_sorted = s[order], yt[order]
    # last index of each run of equal scores
    cut = np.r_[np.nonzero(np.diff(s_sorted))[0], yt.size - 1]
    tps = np.cumsum(y_sorted)[cut]
    fps = (cut + 1) - tps
    tpr = np.r_[0, tps] / n_pos
    fpr = np.r_[0, fps] / n_neg
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))


def _class_row(cm: ConfusionMatrix, support: int) -> dict:
    _, precision, recall, f1 = basic_metrics(cm)
    return {"precision": precision, "recall": recall, "f1": f1, "support": support}


def classwise_report(y_true, y_pred) -> list[dict]:
    """Per-class rows followed by macro and weighted averages.

    Each row is a dict with ``label``, ``precision``, ``recall``, ``f1`` and
    ``support``.
    """
    return classwise_from_confusion(confusion(y_true, y_pred))


def classwise_from_confusion(cm: ConfusionMatrix) -> list[dict]:
    support = {0: cm.tn + cm.fp, 1: cm.tp + cm.fn}
    rows = [
        {"label": "0", **_class_row(cm.swapped(), support[0])},
        {"label": "1", **_class_row(cm, support[1])},
    ]
    total = support[0] + support[1]
    keys = ("precision", "recall", "f1")
    macro = {k: float(np.mean([r[k] for r in rows])) for k in keys}
    if total:
        weighted = {k: sum(r[k] * r["support"] for r in rows) / total for k in keys}
    else:
        weighted = {k: math.nan for k in keys}
    rows.append({"label": "macro avg", **macro, "support": total})
    rows.append({"label": "weighted avg", **weighted, "support": total})
    return rows


def report_from_confusion(cm: ConfusionMatrix, auc: float = math.nan) -> MetricsReport:
    accuracy, precision, recall, f1 = basic_metrics(cm)
    kappa = cohen_kappa(cm)
    named = {"accuracy": accuracy, "precision": precision, "recall": recall,
             "f1": f1, "kappa": kappa}
    undefined = [k for k, v in named.items() if math.isnan(v)]
    return MetricsReport(confusion=cm, accuracy=accuracy, precision=precision,
                         recall=recall, f1=f1, kappa=kappa, auc=auc,
                         undefined=undefined, classwise=classwise_from_confusion(cm))


def evaluate(y_true, y_pred, scores=None) -> MetricsReport:
    """Full report; AUC is computed from ``scores`` over all instances when given."""
    cm = confusion(y_true, y_pred)
    auc = math.nan
    if scores is not None:
        try:
            auc = roc_auc(y_true, scores)
        except ValueError:
            auc = math.nan
    report = report_from_confusion(cm, auc)
    if scores is not None and math.isnan(auc):
        report.undefined.append("auc")
    return report


TABLE_ROWS = ("TP", "TN", "FP", "FN", "Accuracy", "Precision", "Recall",
              "F1-score", "Kappa Score", "AUC")


def table_column(report: MetricsReport) -> list:
    cm = report.confusion
    return [cm.tp, cm.tn, cm.fp, cm.fn, report.accuracy, report.precision,
            report.recall, report.f1, report.kappa, report.auc]
