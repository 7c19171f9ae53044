"""Stochastic gradient boosting with binomial deviance and Newton leaf values."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from ..seeding import derive_seed
from .base import Classifier, as_matrix, as_xy, register, require_both_classes
from .tree import SSE, Tree, grow_tree

NEWTON_FLOOR = 1e-12


@dataclass(frozen=True)
class BoostParams:
    n_trees: int = 100
    depth: int = 3
    shrinkage: float = 0.1
    subsample: float = 0.5
    min_leaf: int = 10


def binomial_deviance(y, f) -> float:
    """Mean binomial deviance ``-2 mean(y f - log(1 + e^f))`` of raw scores ``f``."""
    y = np.asarray(y, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    return float(-2.0 * np.mean(y * f - np.logaddexp(0.0, f)))


@register
class BoostModel(Classifier):
    kind = "gradient_boosting"

    def __init__(self, f0: float, trees: list, params: BoostParams, deviance_path=None):
        self.f0 = f0
        self.trees = trees
        self.params = params
        self.deviance_path = list(deviance_path or [])

    def decision_function(self, X) -> np.ndarray:
        X = as_matrix(X)
        f = np.full(len(X), self.f0)
        for tree in self.trees:
            f += self.params.shrinkage * tree.predict_value(X)
        return f

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.decision_function(X))

    def to_json(self) -> dict:
        return {
            "params": asdict(self.params),
            "f0": self.f0,
            "trees": [t.to_json() for t in self.trees],
            "deviance_path": self.deviance_path,
        }

    @classmethod
    def from_json(cls, doc):
        return cls(float(doc["f0"]), [Tree.from_json(t) for t in doc["trees"]],
                   BoostParams(**doc["params"]), doc.get("deviance_path"))


def fit_gradient_boosting(X, y=None, params: BoostParams | None = None, seed: int = 0) -> BoostModel:
    X, y = as_xy(X, y)
    require_both_classes(y)
    params = params or BoostParams()
    n = len(y)
    pos = int(y.sum())
    f0 = math.log(pos / (n - pos))
    f = np.full(n, f0)
    yf = y.astype(np.float64)
    rng = np.random.default_rng(derive_seed(seed, "boost-subsample"))
    n_bag = n if params.subsample >= 1.0 else max(2 * params.min_leaf, int(params.subsample * n))
    n_bag = min(n_bag, n)
    trees = []
    path = [binomial_deviance(yf, f)]
    for _ in range(params.n_trees):
        p = expit(f)
        resid = yf - p
        bag = np.arange(n) if n_bag == n else np.sort(rng.choice(n, size=n_bag, replace=False))
        tree = grow_tree(X, resid, bag, criterion=SSE, max_depth=params.depth,
                         min_split=2 * params.min_leaf, min_leaf=params.min_leaf, cp=0.0)
        leaf = tree.apply(X[bag])
        num = np.bincount(leaf, weights=resid[bag], minlength=tree.n_nodes)
        den = np.bincount(leaf, weights=(p * (1.0 - p))[bag], minlength=tree.n_nodes)
        tree = tree.with_values(num / np.maximum(den, NEWTON_FLOOR))
        f += params.shrinkage * tree.predict_value(X)
        trees.append(tree)
        path.append(binomial_deviance(yf, f))
    return BoostModel(f0, trees, params, path)
