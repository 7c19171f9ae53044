"""Naive Bayes on raw (un-encoded) student records.

Numeric and integer predictors get per-class Gaussian likelihoods with the
maximum-likelihood (population) variance, floored at ``var_floor``.
Categorical predictors get Laplace-smoothed frequency tables
``(count + laplace) / (class_n + laplace * n_levels)``.  Missing cells are
skipped in the likelihood product.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from ..tabular import CATEGORICAL, PREDICTOR, Dataset
from .base import Classifier, register, require_both_classes

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class NaiveBayesParams:
    laplace: float = 1.0
    var_floor: float = 1e-9


@register
class NaiveBayesModel(Classifier):
    kind = "naive_bayes"

    def __init__(self, log_prior: np.ndarray, gaussian: dict, tables: dict, params: NaiveBayesParams):
        # log_prior[c]; gaussian[name] = (means[2], vars[2]); tables[name] = (levels, logp[2, L])
        self.log_prior = np.asarray(log_prior, dtype=np.float64)
        self.gaussian = gaussian
        self.tables = tables
        self.params = params

    def log_joint(self, ds: Dataset) -> np.ndarray:
        n = ds.n_rows
        out = np.tile(self.log_prior, (n, 1))
        # sorted so that a JSON round trip (sorted keys) sums in the same order
        for name in sorted(self.gaussian):
            means, variances = self.gaussian[name]
            x = np.asarray(ds[name], dtype=np.float64)
            seen = ~ds.missing[:, ds.schema.index(name)]
            for c in (0, 1):
                ll = -0.5 * (LOG_2PI + np.log(variances[c]) + (x - means[c]) ** 2 / variances[c])
                out[:, c] += np.where(seen, ll, 0.0)
        for name in sorted(self.tables):
            levels, logp = self.tables[name]
            lookup = {lvl: k for k, lvl in enumerate(levels)}
            seen = ~ds.missing[:, ds.schema.index(name)]
            for i, v in enumerate(ds[name]):
                if seen[i]:
                    out[i] += logp[:, lookup[v]]
        return out

    def predict_proba(self, ds: Dataset) -> np.ndarray:
        lj = self.log_joint(ds)
        return expit(lj[:, 1] - lj[:, 0])

    def to_json(self) -> dict:
        return {
            "params": asdict(self.params),
            "log_prior": self.log_prior.tolist(),
            "gaussian": {k: [list(map(float, m)), list(map(float, v))]
                         for k, (m, v) in self.gaussian.items()},
            "tables": {k: [list(levels), logp.tolist()] for k, (levels, logp) in self.tables.items()},
        }

    @classmethod
    def from_json(cls, doc):
        gaussian = {k: (np.asarray(m), np.asarray(v)) for k, (m, v) in doc["gaussian"].items()}
        tables = {k: (tuple(levels), np.asarray(logp)) for k, (levels, logp) in doc["tables"].items()}
        return cls(np.asarray(doc["log_prior"]), gaussian, tables, NaiveBayesParams(**doc["params"]))


def fit_naive_bayes(ds: Dataset, params: NaiveBayesParams | None = None, seed: int = 0) -> NaiveBayesModel:
    params = params or NaiveBayesParams()
    y = ds.labels()
    require_both_classes(y)
    counts = np.array([(y == 0).sum(), (y == 1).sum()], dtype=np.float64)
    log_prior = np.log(counts / counts.sum())
    gaussian, tables = {}, {}
    for j, col in enumerate(ds.schema.columns):
        if col.role != PREDICTOR:
            continue
        seen = ~ds.missing[:, j]
        if col.kind.is_numeric:
            x = np.asarray(ds[col.name], dtype=np.float64)
            means, variances = np.empty(2), np.empty(2)
            for c in (0, 1):
                xc = x[seen & (y == c)]
                means[c] = xc.mean() if len(xc) else 0.0
                variances[c] = max(xc.var() if len(xc) else 1.0, params.var_floor)
            gaussian[col.name] = (means, variances)
        elif col.kind.kind == CATEGORICAL:
            levels = col.kind.levels
            lookup = {lvl: k for k, lvl in enumerate(levels)}
            freq = np.zeros((2, len(levels)))
            for v, c in zip(ds[col.name][seen], y[seen]):
                freq[c, lookup[v]] += 1.0
            total = freq.sum(axis=1, keepdims=True)
            with np.errstate(divide="ignore"):
                logp = np.log((freq + params.laplace) / (total + params.laplace * len(levels)))
            tables[col.name] = (levels, logp)
    return NaiveBayesModel(log_prior, gaussian, tables, params)
