"""Confusion-matrix metrics with positive = not graduating on time.

``p_incorrect_graduated`` is the share of *all* test students who were
predicted to graduate on time but did not, ``fn / total``.  Published
tables report this figure without stating its denominator; ``fn / total``
is the one that reproduces them through the identity

    fn / total = (1 - recall) * prevalence,   prevalence = (tp + fn) / total,

whereas ``fn / (tp + fn)`` would simply restate ``1 - recall``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

PUBLISHED_PREVALENCE = 0.888
IDENTITY_TOLERANCE = 0.002


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def prevalence(self) -> float:
        return (self.tp + self.fn) / self.total if self.total else math.nan


def confusion(y_true, y_pred) -> ConfusionMatrix:
    t = np.asarray(y_true).astype(np.int64)
    p = np.asarray(y_pred).astype(np.int64)
    if t.shape != p.shape or t.ndim != 1:
        raise ValueError(f"label vectors differ in shape: {t.shape} vs {p.shape}")
    if len(t) == 0:
        raise ValueError("confusion matrix of zero predictions")
    return ConfusionMatrix(
        tp=int(np.sum((t == 1) & (p == 1))),
        fp=int(np.sum((t == 0) & (p == 1))),
        fn=int(np.sum((t == 1) & (p == 0))),
        tn=int(np.sum((t == 0) & (p == 0))),
    )


def recall(cm: ConfusionMatrix) -> float:
    denom = cm.tp + cm.fn
    return cm.tp / denom if denom else math.nan


def precision(cm: ConfusionMatrix) -> float:
    denom = cm.tp + cm.fp
    return cm.tp / denom if denom else math.nan


def f1(cm: ConfusionMatrix) -> float:
    p, r = precision(cm), recall(cm)
    if math.isnan(p) or math.isnan(r):
        return math.nan
    if p + r == 0:
        return 0.0
    return 2 * p * r / (p + r)


def negative_recall(cm: ConfusionMatrix) -> float:
    """Recall of the on-time (minority) class, ``tn / (tn + fp)``."""
    denom = cm.tn + cm.fp
    return cm.tn / denom if denom else math.nan


def p_incorrect_graduated(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    return cm.fn / cm.total


def precision_from_f1(f1_score: float, recall_score: float) -> float:
    """Solve ``F = 2PR / (P + R)`` for ``P``."""
    return f1_score * recall_score / (2 * recall_score - f1_score)


@dataclass(frozen=True)
class MetricsRow:
    model: str
    variant: str
    recall: float
    f1: float
    p_incorrect_graduated: float

    def to_json(self) -> dict:
        return {"model": self.model, "variant": self.variant, "recall": self.recall,
                "f1": self.f1, "p_incorrect_graduated": self.p_incorrect_graduated}


def metrics_row(model: str, variant: str, y_true, y_pred) -> MetricsRow:
    cm = confusion(y_true, y_pred)
    return MetricsRow(model, variant, recall(cm), f1(cm), p_incorrect_graduated(cm))


@dataclass(frozen=True)
class IdentityCheck:
    recall: float
    p_err: float
    expected: float
    residual: float
    passed: bool


def verify_table_identity(rows, prevalence: float = PUBLISHED_PREVALENCE,
                          tolerance: float = IDENTITY_TOLERANCE) -> list[IdentityCheck]:
    """Check ``|p_err - (1 - recall) * prevalence| <= tolerance`` for each ``(recall, p_err)``."""
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to verify")
    out = []
    for r, p_err in rows:
        expected = (1.0 - r) * prevalence
        residual = p_err - expected
        out.append(IdentityCheck(r, p_err, expected, residual, abs(residual) <= tolerance))
    return out


@dataclass(frozen=True)
class PublishedRow:
    table: str
    group: str
    model: str
    variant: str
    recall: float
    f1: float
    p_err: float


def load_published_rows(path=None) -> list[PublishedRow]:
    """Published (recall, F1, P_err) rows; defaults to the fixture shipped with the package."""
    if path is None:
        text = resources.files("ontime.data").joinpath("published_tables.json").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    doc = json.loads(text) if text.strip() else {}
    rows = doc.get("rows", [])
    if not rows:
        raise ValueError("published-table fixture contains no rows")
    return [PublishedRow(r["table"], r["group"], r["model"], r["variant"], float(r["recall"]),
                         float(r["f1"]), float(r["p_err"])) for r in rows]
