"""Confusion matrices, Type I/II error rates, classification reports and ROC/AUC.

The positive class is 1 (default) throughout.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, SingleClass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


def _pair(y_true, y_pred):
    y_true = np.asarray(y_true).astype(np.int64).ravel()
    y_pred = np.asarray(y_pred).ravel()
    if y_true.shape != y_pred.shape:
        raise LengthMismatch(f"y_true has {y_true.size} entries, y_pred has {y_pred.size}")
    return y_true, y_pred


def confusion(y_true, y_pred) -> ConfusionMatrix:
    y_true, y_pred = _pair(y_true, y_pred)
    if y_true.size == 0:
        raise LengthMismatch("cannot build a confusion matrix from zero observations")
    y_pred = y_pred.astype(np.int64)
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    tn = int(np.sum((y_true == 0) & (y_pred == 0)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    return ConfusionMatrix(tp, fp, tn, fn)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def type1_rate(cm: ConfusionMatrix) -> float:
    """FP / (FP + TN); 0 when there are no actual negatives (see :func:`type1_defined`)."""
    return _ratio(cm.fp, cm.fp + cm.tn)


def type2_rate(cm: ConfusionMatrix) -> float:
    """FN / (FN + TP); 0 when there are no actual positives (see :func:`type2_defined`)."""
    return _ratio(cm.fn, cm.fn + cm.tp)


def type1_defined(cm: ConfusionMatrix) -> bool:
    return cm.fp + cm.tn > 0


def type2_defined(cm: ConfusionMatrix) -> bool:
    return cm.fn + cm.tp > 0


def f1(precision: float, recall: float) -> float:
    s = precision + recall
    return 2 * precision * recall / s if s > 0 else 0.0


@dataclass(frozen=True)
class ClassStats:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassificationReport:
    per_class: dict[int, ClassStats]
    accuracy: float
    macro: ClassStats
    weighted: ClassStats

    @property
    def support(self) -> int:
        return self.per_class[0].support + self.per_class[1].support

    def to_dict(self) -> dict:
        def row(s):
            return {"precision": s.precision, "recall": s.recall, "f1": s.f1, "support": s.support}

        return {
            "0": row(self.per_class[0]),
            "1": row(self.per_class[1]),
            "accuracy": self.accuracy,
            "macro_avg": row(self.macro),
            "weighted_avg": row(self.weighted),
            "support": self.support,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassificationReport":
        def stats(r):
            return ClassStats(r["precision"], r["recall"], r["f1"], r["support"])

        return cls(
            per_class={0: stats(d["0"]), 1: stats(d["1"])},
            accuracy=d["accuracy"],
            macro=stats(d["macro_avg"]),
            weighted=stats(d["weighted_avg"]),
        )

    def render(self, digits: int = 2) -> str:
        """Text table in the familiar precision/recall/f1/support layout."""
        fmt = f"{{:>12}} {{:>9.{digits}f}} {{:>9.{digits}f}} {{:>9.{digits}f}} {{:>9}}\n"
        out = f"{'':>12} {'precision':>9} {'recall':>9} {'f1-score':>9} {'support':>9}\n\n"
        for c in (0, 1):
            s = self.per_class[c]
            out += fmt.format(c, s.precision, s.recall, s.f1, s.support)
        out += "\n"
        out += f"{'accuracy':>12} {'':>9} {'':>9} {self.accuracy:>9.{digits}f} {self.support:>9}\n"
        for name, s in (("macro avg", self.macro), ("weighted avg", self.weighted)):
            out += fmt.format(name, s.precision, s.recall, s.f1, s.support)
        return out


def report_from_confusion(cm: ConfusionMatrix) -> ClassificationReport:
    """Per-class and averaged precision/recall/F1.

    Precision of a class that is never predicted is 0, as is recall of a
    class with no support.
    """
    rows = {}
    # class 1 is the positive class; class 0 swaps the roles of the cells
    for c, (hit, false_alarm, miss) in {0: (cm.tn, cm.fn, cm.fp), 1: (cm.tp, cm.fp, cm.fn)}.items():
        p = _ratio(hit, hit + false_alarm)
        r = _ratio(hit, hit + miss)
        rows[c] = ClassStats(p, r, f1(p, r), hit + miss)
    total = cm.n
    macro = ClassStats(
        (rows[0].precision + rows[1].precision) / 2,
        (rows[0].recall + rows[1].recall) / 2,
        (rows[0].f1 + rows[1].f1) / 2,
        total,
    )
    weighted = ClassStats(
        *(sum(getattr(rows[c], a) * rows[c].support for c in (0, 1)) / total for a in ("precision", "recall", "f1")),
        total,
    )
    return ClassificationReport(rows, (cm.tp + cm.tn) / total, macro, weighted)


def classification_report(y_true, y_pred) -> ClassificationReport:
    return report_from_confusion(confusion(y_true, y_pred))


@dataclass(frozen=True, eq=False)
class RocCurve:
    """ROC points from the strictest threshold (+inf) down to the loosest."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["threshold", "fpr", "tpr"])
        for t, x, y in zip(self.thresholds, self.fpr, self.tpr):
            w.writerow([repr(float(t)), repr(float(x)), repr(float(y))])
        return buf.getvalue()


def roc_curve(y_true, scores) -> RocCurve:
    """Sweep thresholds over the distinct scores in decreasing order.

    Tied scores move together, producing a diagonal segment; the trapezoid
    area under such a segment equals giving tied positive/negative pairs half
    credit, so :attr:`RocCurve.auc` is the Mann-Whitney statistic.
    """
    y, s = _pair(y_true, scores)
    s = s.astype(float)
    n_pos = int((y == 1).sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC needs both classes present")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last_of_run = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tps = np.cumsum(y)[last_of_run]
    fps = (last_of_run + 1) - tps
    tpr = np.r_[0.0, tps / n_pos]
    fpr = np.r_[0.0, fps / n_neg]
    thresholds = np.r_[math.inf, s[last_of_run]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1])) / 2)
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds, auc=auc)
