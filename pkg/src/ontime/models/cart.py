"""Decision tree and random forest classifiers (Gini CART)."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from ..seeding import derive_seed
from .base import Classifier, as_matrix, as_xy, register, require_both_classes
from .tree import GINI, Tree, grow_tree


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 30
    min_split: int = 20
    min_leaf: int = 7
    cp: float = 0.01


@register
class DecisionTreeModel(Classifier):
    kind = "decision_tree"

    def __init__(self, tree: Tree, params: TreeParams):
        self.tree = tree
        self.params = params

    def predict_proba(self, X) -> np.ndarray:
        return self.tree.predict_value(as_matrix(X))

    def to_json(self) -> dict:
        return {"params": asdict(self.params), "tree": self.tree.to_json()}

    @classmethod
    def from_json(cls, doc):
        return cls(Tree.from_json(doc["tree"]), TreeParams(**doc["params"]))


def fit_decision_tree(X, y=None, params: TreeParams | None = None, seed: int = 0) -> DecisionTreeModel:
    """Greedy recursive partitioning on weighted Gini decrease.

    Growth stops at ``max_depth``, below ``min_split`` rows, or when the best
    decrease relative to the root's total impurity is under ``cp``.  A
    single-class input yields one leaf.
    """
    X, y = as_xy(X, y)
    params = params or TreeParams()
    tree = grow_tree(X, y, criterion=GINI, max_depth=params.max_depth,
                     min_split=params.min_split, min_leaf=params.min_leaf, cp=params.cp,
                     seed=seed)
    return DecisionTreeModel(tree, params)


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 500
    mtry: int | None = None
    min_leaf: int = 1
    min_split: int = 2
    max_depth: int = 10_000
    bootstrap: bool = True
    n_jobs: int = 1


@register
class ForestModel(Classifier):
    kind = "random_forest"

    def __init__(self, trees: list, tree_seeds: list, params: ForestParams, mtry: int):
        self.trees = trees
        self.tree_seeds = tree_seeds
        self.params = params
        self.mtry = mtry

    def predict_proba(self, X) -> np.ndarray:
        X = as_matrix(X)
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict_value(X)
        return total / len(self.trees)

    def to_json(self) -> dict:
        return {
            "params": asdict(self.params),
            "mtry": self.mtry,
            "tree_seeds": list(self.tree_seeds),
            "trees": [t.to_json() for t in self.trees],
        }

    @classmethod
    def from_json(cls, doc):
        return cls([Tree.from_json(t) for t in doc["trees"]], list(doc["tree_seeds"]),
                   ForestParams(**doc["params"]), int(doc["mtry"]))


def fit_random_forest(X, y=None, params: ForestParams | None = None, seed: int = 0) -> ForestModel:
    """Bagged Gini trees with ``mtry`` columns sampled afresh at every split.

    Tree ``i`` uses seed ``derive_seed(seed, "forest-tree", i)`` for both its
    bootstrap draw and its column sampling, so trees can be grown in any
    order (or concurrently) and still be assembled identically.
    """
    X, y = as_xy(X, y)
    require_both_classes(y)
    params = params or ForestParams()
    n, p = X.shape
    mtry = params.mtry if params.mtry is not None else max(1, int(math.floor(math.sqrt(p))))
    seeds = [derive_seed(seed, "forest-tree", i) for i in range(params.n_trees)]

    def build(tree_seed: int) -> Tree:
        rows = None
        if params.bootstrap:
            rows = np.random.default_rng(tree_seed).integers(0, n, size=n)
        return grow_tree(X, y, rows, criterion=GINI, max_depth=params.max_depth,
                         min_split=params.min_split, min_leaf=params.min_leaf, cp=0.0,
                         mtry=mtry, seed=tree_seed)

    if params.n_jobs > 1:
        with ThreadPoolExecutor(params.n_jobs) as pool:
            trees = list(pool.map(build, seeds))
    else:
        trees = [build(s) for s in seeds]
    return ForestModel(trees, seeds, params, mtry)
