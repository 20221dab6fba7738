"""Classification metrics, run statistics and the paired t-test.

All scores are pure functions of a confusion matrix or of accuracy series;
accuracies are reported in percent.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (C, C) ints, row = true class, column = predicted
    class_names: list[str]

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        c = len(self.class_names)
        if self.counts.shape != (c, c):
            raise ValueError("confusion matrix shape does not match class names")
        if (self.counts < 0).any():
            raise ValueError("negative count")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def to_csv(self) -> str:
        lines = ["," + ",".join(self.class_names)]
        for name, row in zip(self.class_names, self.counts):
            lines.append(name + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


def confusion(preds, labels, num_classes: int, class_names=None) -> ConfusionMatrix:
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape:
        raise ValueError("preds and labels length mismatch")
    if preds.size and (preds.min() < 0 or preds.max() >= num_classes):
        raise ValueError("prediction index out of range")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError("label index out of range")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (labels, preds), 1)
    if class_names is None:
        class_names = [str(i) for i in range(num_classes)]
    return ConfusionMatrix(counts=counts, class_names=list(class_names))


def accuracy(cm: ConfusionMatrix) -> float:
    """Percent of correctly classified samples."""
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    return 100.0 * float(np.trace(cm.counts)) / cm.total


@dataclass
class ClassReport:
    class_names: list[str]
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    accuracy: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float

    def to_json(self) -> str:
        doc = {
            "accuracy": self.accuracy,
            "weighted": {
                "precision": self.weighted_precision,
                "recall": self.weighted_recall,
                "f1": self.weighted_f1,
            },
            "per_class": {
                name: {
                    "precision": float(p),
                    "recall": float(r),
                    "f1": float(f),
                    "support": int(s),
                }
                for name, p, r, f, s in zip(
                    self.class_names, self.precision, self.recall, self.f1, self.support
                )
            },
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def _safe_div(num, den):
    """Elementwise num/den with the 0/0 -> 0 reporting convention."""
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    if np.any((den == 0) & (num == 0)):
        warnings.warn("0/0 in precision/recall, reported as 0", RuntimeWarning, stacklevel=3)
    return np.divide(num, den, out=np.zeros_like(num), where=den != 0)


def per_class_prf(cm: ConfusionMatrix):
    """Per-class precision, recall and F1 with the 0/0 -> 0 convention."""
    tp = np.diag(cm.counts).astype(np.float64)
    precision = _safe_div(tp, cm.counts.sum(axis=0))
    recall = _safe_div(tp, cm.counts.sum(axis=1))
    f1 = _safe_div(2.0 * precision * recall, precision + recall)
    return precision, recall, f1


def weighted_metrics(cm: ConfusionMatrix) -> tuple[float, float, float]:
    """Support-weighted means of per-class precision/recall/F1."""
    precision, recall, f1 = per_class_prf(cm)
    weights = cm.support / cm.total
    return (
        float(weights @ precision),
        float(weights @ recall),
        float(weights @ f1),
    )


def class_report(cm: ConfusionMatrix) -> ClassReport:
    precision, recall, f1 = per_class_prf(cm)
    wp, wr, wf = weighted_metrics(cm)
    return ClassReport(
        class_names=cm.class_names,
        precision=precision,
        recall=recall,
        f1=f1,
        support=cm.support,
        accuracy=accuracy(cm),
        weighted_precision=wp,
        weighted_recall=wr,
        weighted_f1=wf,
    )


def mean_std(series) -> tuple[float, float]:
    """Mean and sample (k-1 denominator) standard deviation."""
    series = np.asarray(series, dtype=np.float64)
    if series.size < 2:
        raise ValueError("need at least 2 values")
    return float(series.mean()), float(series.std(ddof=1))


def _betacf(a: float, b: float, x: float, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """I_x(a, b) via the continued-fraction expansion."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must be in [0, 1]")
    if x in (0.0, 1.0):
        return x
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_tailed(t: float, df: int) -> float:
    """Two-tailed Student-t tail probability, P(|T| >= |t|)."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / (df + t * t), df / 2.0, 0.5)


@dataclass
class TTestResult:
    t: float
    df: int
    p: float
    zero_variance: bool = False

    def to_json(self) -> str:
        return json.dumps({"t": self.t, "df": self.df, "p": self.p}, sort_keys=True)


def paired_ttest(a, b) -> TTestResult:
    """Two-tailed paired t-test on differences b - a."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("series length mismatch")
    k = a.size
    if k < 2:
        raise ValueError("need at least 2 paired values")
    diff = b - a
    mean = diff.mean()
    std = diff.std(ddof=1)
    df = k - 1
    if std == 0.0:
        if mean == 0.0:
            return TTestResult(t=0.0, df=df, p=1.0, zero_variance=True)
        warnings.warn("zero variance of paired differences", RuntimeWarning, stacklevel=2)
        return TTestResult(t=math.copysign(math.inf, mean), df=df, p=0.0, zero_variance=True)
    t = mean / (std / math.sqrt(k))
    return TTestResult(t=float(t), df=df, p=t_sf_two_tailed(t, df))
