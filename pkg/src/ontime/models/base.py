"""Shared classifier contract and versioned JSON model persistence."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MODEL_FORMAT_VERSION = 1

_REGISTRY: dict = {}


def register(cls):
    _REGISTRY[cls.kind] = cls
    return cls


class Classifier:
    """Fitted binary classifier; positive class = not graduating on time."""

    kind = "abstract"

    def predict_proba(self, X) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) >= threshold).astype(np.int64)

    def to_json(self) -> dict:
        raise NotImplementedError

    @classmethod
    def from_json(cls, doc: dict):
        raise NotImplementedError


def as_xy(X, y=None) -> tuple[np.ndarray, np.ndarray]:
    """Accept an EncodedMatrix, an ``(X, y)`` tuple, or ``X`` and ``y`` separately."""
    if y is None and isinstance(X, tuple):
        X, y = X
    elif y is None:
        y = X.labels
        X = X.values
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError(f"design matrix {X.shape} and labels {y.shape} do not align")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    return X, y.astype(np.int64)


def as_matrix(X) -> np.ndarray:
    values = getattr(X, "values", X)
    return np.ascontiguousarray(values, dtype=np.float64)


def require_both_classes(y: np.ndarray) -> None:
    if y.min() == y.max():
        raise ValueError("training labels contain a single class")


def model_to_json(model: Classifier) -> dict:
    return {"format_version": MODEL_FORMAT_VERSION, "kind": model.kind, **model.to_json()}


def model_from_json(doc: dict) -> Classifier:
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version!r}")
    try:
        cls = _REGISTRY[doc["kind"]]
    except KeyError:
        raise ValueError(f"unknown model kind {doc.get('kind')!r}") from None
    return cls.from_json(doc)


def save_model(model: Classifier, path) -> None:
    Path(path).write_text(json.dumps(model_to_json(model), sort_keys=True), encoding="utf-8")


def load_model(path) -> Classifier:
    return model_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
