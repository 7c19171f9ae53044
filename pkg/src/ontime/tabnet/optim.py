"""Adam with bias correction over a dict of named parameter arrays."""

from __future__ import annotations

import numpy as np


def adam_step(param, grad, m, v, t, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update; returns ``(param, m, v)`` as new arrays."""
    if t < 1:
        raise ValueError("Adam timestep starts at 1")
    m = beta1 * m + (1.0 - beta1) * grad
    v = beta2 * v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    return param - lr * m_hat / (np.sqrt(v_hat) + eps), m, v


class Adam:
    """Moments per named tensor and one timestep shared by all of them."""

    def __init__(self, params: dict, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        for k in params:
            params[k], self.m[k], self.v[k] = adam_step(
                params[k], grads[k], self.m[k], self.v[k], self.t,
                self.lr, self.beta1, self.beta2, self.eps)
