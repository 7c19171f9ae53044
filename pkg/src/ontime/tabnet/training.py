"""Mini-batch training with validation-based early stopping, and the fitted model."""

from __future__ import annotations

import logging
import math

import numpy as np

from ..models.base import Classifier, as_matrix, as_xy, register, require_both_classes
from .layers import cross_entropy
from .network import TabNetEncoder, TabNetHyper
from .optim import Adam

log = logging.getLogger(__name__)


class TabNetDivergence(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite training loss {loss!r} at epoch {epoch}")
        self.epoch = epoch


class EarlyStopping:
    """Tracks the best validation loss; ``update`` returns True once patience runs out."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = -1
        self.epoch = -1

    def update(self, loss: float) -> bool:
        self.epoch += 1
        if loss < self.best:
            self.best = loss
            self.best_epoch = self.epoch
            return False
        return self.epoch - self.best_epoch >= self.patience


@register
class TabNetModel(Classifier):
    kind = "tabnet"

    def __init__(self, encoder: TabNetEncoder, history=None):
        self.encoder = encoder
        self.history = list(history or [])

    def predict_proba(self, X) -> np.ndarray:
        return self.encoder.predict_proba(as_matrix(X))[:, 1]

    def masks(self, X) -> list[np.ndarray]:
        """Per-step attention masks for each row (inference mode)."""
        return self.encoder.forward(as_matrix(X), train=False)[1]

    def to_json(self) -> dict:
        return {"encoder": self.encoder.to_json(), "history": self.history}

    @classmethod
    def from_json(cls, doc):
        return cls(TabNetEncoder.from_json(doc["encoder"]), doc.get("history"))


def _val_loss(encoder, X, y) -> float:
    logits = encoder.forward(X, train=False)[0]
    return cross_entropy(logits, y)[0]


def train_tabnet(train, val, hyper: TabNetHyper | None = None):
    """Adam on softmax cross-entropy, keeping the parameters of the best validation epoch.

    Returns ``(model, history)`` where ``history`` has one dict per epoch with
    ``train_loss`` (mean over batches) and ``val_loss``.
    """
    hyper = hyper or TabNetHyper()
    X, y = as_xy(train)
    Xv, yv = as_xy(val)
    if len(X) == 0 or len(Xv) == 0:
        raise ValueError("train and validation sets must be non-empty")
    require_both_classes(y)
    encoder = TabNetEncoder(X.shape[1], hyper)
    opt = Adam(encoder.params, lr=hyper.lr)
    rng = np.random.default_rng(hyper.seed)
    stopper = EarlyStopping(hyper.patience)
    best = encoder.copy()
    history = []
    for epoch in range(hyper.max_epochs):
        order = rng.permutation(len(X))
        losses, weights = [], []
        for start in range(0, len(X), hyper.batch_size):
            batch = order[start:start + hyper.batch_size]
            if len(batch) < 2:
                continue
            loss, grads = encoder.loss_and_grads(X[batch], y[batch], hyper.lambda_sparse)
            if not math.isfinite(loss):
                raise TabNetDivergence(epoch, loss)
            del grads["input"]
            opt.step(encoder.params, grads)
            losses.append(loss)
            weights.append(len(batch))
        train_loss = float(np.average(losses, weights=weights))
        val_loss = _val_loss(encoder, Xv, yv)
        if not math.isfinite(val_loss):
            raise TabNetDivergence(epoch, val_loss)
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss})
        log.debug("epoch %d train %.5f val %.5f", epoch, train_loss, val_loss)
        stop = stopper.update(val_loss)
        if stopper.best_epoch == epoch:
            best = encoder.copy()
        if stop:
            break
    return TabNetModel(best, history), history
