"""Ridge-penalized logistic regression fitted by IRLS (Newton-Raphson)."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from .base import Classifier, as_matrix, as_xy, register, require_both_classes


@dataclass(frozen=True)
class LogisticParams:
    ridge: float = 1e-6
    tol: float = 1e-8
    max_iter: int = 100


@register
class LogisticModel(Classifier):
    kind = "logistic_regression"

    def __init__(self, intercept: float, coef: np.ndarray, params: LogisticParams,
                 converged: bool = True, n_iter: int = 0):
        self.intercept = intercept
        self.coef = np.asarray(coef, dtype=np.float64)
        self.params = params
        self.converged = converged
        self.n_iter = n_iter

    def decision_function(self, X) -> np.ndarray:
        return self.intercept + as_matrix(X) @ self.coef

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.decision_function(X))

    def to_json(self) -> dict:
        return {
            "params": asdict(self.params),
            "intercept": self.intercept,
            "coef": self.coef.tolist(),
            "converged": self.converged,
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_json(cls, doc):
        return cls(float(doc["intercept"]), np.asarray(doc["coef"], dtype=np.float64),
                   LogisticParams(**doc["params"]), bool(doc["converged"]), int(doc["n_iter"]))


def penalized_score(X, y, intercept, coef, ridge) -> np.ndarray:
    """Gradient of the penalized log-likelihood; zero at the optimum."""
    X = as_matrix(X)
    r = np.asarray(y, dtype=np.float64) - expit(intercept + X @ coef)
    return np.concatenate([[r.sum()], X.T @ r - ridge * coef])


def _objective(Z, y, beta, penalty):
    eta = Z @ beta
    return float(np.sum(np.logaddexp(0.0, eta) - y * eta) + 0.5 * np.sum(penalty * beta * beta))


def fit_logistic_regression(X, y=None, params: LogisticParams | None = None, seed: int = 0) -> LogisticModel:
    """Minimize ``-loglik + ridge/2 * ||coef||^2`` (intercept unpenalized).

    Iterates Newton steps until ``max |step| < tol``; a step that increases the
    objective is halved.  Non-convergence leaves ``converged=False`` on the
    returned model instead of raising.
    """
    X, y = as_xy(X, y)
    require_both_classes(y)
    params = params or LogisticParams()
    n, p = X.shape
    Z = np.hstack([np.ones((n, 1)), X])
    yf = y.astype(np.float64)
    penalty = np.full(p + 1, params.ridge)
    penalty[0] = 0.0
    beta = np.zeros(p + 1)
    base = yf.mean()
    beta[0] = np.log(base / (1.0 - base))
    obj = _objective(Z, yf, beta, penalty)
    converged = False
    it = 0
    for it in range(1, params.max_iter + 1):
        mu = expit(Z @ beta)
        w = mu * (1.0 - mu)
        grad = Z.T @ (yf - mu) - penalty * beta
        hess = (Z * w[:, None]).T @ Z + np.diag(penalty)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        t = 1.0
        while True:
            cand = beta + t * step
            cand_obj = _objective(Z, yf, cand, penalty)
            if cand_obj <= obj + 1e-12 * max(1.0, abs(obj)) or t < 1e-10:
                break
            t *= 0.5
        beta, obj = cand, cand_obj
        if np.max(np.abs(t * step)) < params.tol:
            converged = True
            break
    return LogisticModel(float(beta[0]), beta[1:], params, converged, it)
