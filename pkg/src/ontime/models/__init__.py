"""From-scratch classifiers sharing ``predict_proba`` / ``predict`` / JSON persistence."""

from .base import Classifier, load_model, model_from_json, model_to_json, save_model
from .bayes import NaiveBayesModel, NaiveBayesParams, fit_naive_bayes
from .boosting import BoostModel, BoostParams, binomial_deviance, fit_gradient_boosting
from .cart import (
    DecisionTreeModel,
    ForestModel,
    ForestParams,
    TreeParams,
    fit_decision_tree,
    fit_random_forest,
)
from .linear import LogisticModel, LogisticParams, fit_logistic_regression, penalized_score
from .tree import Tree, gini_impurity, grow_tree

__all__ = [
    "BoostModel",
    "BoostParams",
    "Classifier",
    "DecisionTreeModel",
    "ForestModel",
    "ForestParams",
    "LogisticModel",
    "LogisticParams",
    "NaiveBayesModel",
    "NaiveBayesParams",
    "Tree",
    "TreeParams",
    "binomial_deviance",
    "fit_decision_tree",
    "fit_gradient_boosting",
    "fit_logistic_regression",
    "fit_naive_bayes",
    "fit_random_forest",
    "gini_impurity",
    "grow_tree",
    "load_model",
    "model_from_json",
    "model_to_json",
    "penalized_score",
    "save_model",
]
