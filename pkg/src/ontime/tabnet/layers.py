"""Forward/backward primitives for the TabNet encoder.

Every ``*_forward`` returns ``(output, cache)``; the matching ``*_backward``
takes the upstream gradient and the cache and returns the input gradient
(plus parameter gradients where the layer has parameters).
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, log_softmax, softmax

SQRT_HALF = float(np.sqrt(0.5))
ENTROPY_EPS = 1e-15


def sparsemax(z) -> np.ndarray:
    """Euclidean projection of each row of ``z`` onto the probability simplex."""
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("sparsemax input must be finite")
    squeeze = z.ndim == 1
    z2 = np.atleast_2d(z)
    d = z2.shape[1]
    zs = -np.sort(-z2, axis=1)
    cumsum = np.cumsum(zs, axis=1)
    k = np.arange(1, d + 1)
    support = 1.0 + k * zs > cumsum
    k_max = d - np.argmax(support[:, ::-1], axis=1)
    tau = (cumsum[np.arange(len(z2)), k_max - 1] - 1.0) / k_max
    p = np.maximum(z2 - tau[:, None], 0.0)
    return p[0] if squeeze else p


def sparsemax_backward(p, g) -> np.ndarray:
    """Vector-Jacobian product of sparsemax at output ``p``.

    On the support ``S`` the gradient is ``g - mean_S(g)``; it is zero off it.
    """
    p = np.asarray(p, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    squeeze = p.ndim == 1
    p2, g2 = np.atleast_2d(p), np.atleast_2d(g)
    supp = p2 > 0
    size = supp.sum(axis=1, keepdims=True)
    if np.any(size == 0):
        raise ValueError("sparsemax output has an empty support")
    mean = (g2 * supp).sum(axis=1, keepdims=True) / size
    out = np.where(supp, g2 - mean, 0.0)
    return out[0] if squeeze else out


def fc_forward(x, W, b):
    return x @ W + b, x


def fc_backward(g, cache, W):
    x = cache
    return g @ W.T, x.T @ g, g.sum(axis=0)


def bn_forward(x, gamma, beta, running_mean, running_var, *, train: bool,
               momentum: float = 0.02, eps: float = 1e-5, update: bool = True):
    """Batch normalization; ``update`` controls running-statistic updates in train mode.

    Running statistics are updated in place (exponential average with
    ``momentum``, unbiased batch variance), mirroring common frameworks.
    """
    if train:
        mu = x.mean(axis=0)
        var = x.var(axis=0)
        if update:
            n = len(x)
            unbiased = var * n / (n - 1) if n > 1 else var
            running_mean *= 1.0 - momentum
            running_mean += momentum * mu
            running_var *= 1.0 - momentum
            running_var += momentum * unbiased
    else:
        mu, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    return gamma * xhat + beta, (xhat, inv_std, gamma, train)


def bn_backward(g, cache):
    xhat, inv_std, gamma, train = cache
    dgamma = (g * xhat).sum(axis=0)
    dbeta = g.sum(axis=0)
    dxhat = g * gamma
    if not train:
        return dxhat * inv_std, dgamma, dbeta
    n = len(g)
    dx = inv_std / n * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    return dx, dgamma, dbeta


def glu_forward(x, fc_W, fc_b, bn_params, bn_state, *, train, is_first, update=True,
                momentum=0.02, eps=1e-5):
    """FC -> BN -> gated linear unit, with a scaled residual unless ``is_first``.

    ``bn_params`` is ``(gamma, beta)`` and ``bn_state`` ``(running_mean, running_var)``.
    """
    width = fc_W.shape[1] // 2
    if x.shape[1] != fc_W.shape[0]:
        raise ValueError(f"GLU block expects width {fc_W.shape[0]}, got {x.shape[1]}")
    z, c_fc = fc_forward(x, fc_W, fc_b)
    h, c_bn = bn_forward(z, bn_params[0], bn_params[1], bn_state[0], bn_state[1],
                         train=train, momentum=momentum, eps=eps, update=update)
    u, v = h[:, :width], h[:, width:]
    s = expit(v)
    glu = u * s
    out = glu if is_first else (x + glu) * SQRT_HALF
    return out, (c_fc, c_bn, u, s, is_first)


def glu_backward(g, cache, fc_W):
    """Returns ``(dx, dW, db, dgamma, dbeta)``."""
    c_fc, c_bn, u, s, is_first = cache
    dglu = g if is_first else g * SQRT_HALF
    dh = np.hstack([dglu * s, dglu * u * s * (1.0 - s)])
    dz, dgamma, dbeta = bn_backward(dh, c_bn)
    dx, dW, db = fc_backward(dz, c_fc, fc_W)
    if not is_first:
        dx = dx + g * SQRT_HALF
    return dx, dW, db, dgamma, dbeta


def relu_forward(x):
    return np.maximum(x, 0.0), x > 0


def relu_backward(g, cache):
    return g * cache


def cross_entropy(logits, y):
    """Mean softmax cross-entropy and its gradient with respect to ``logits``."""
    logp = log_softmax(logits, axis=1)
    n = len(y)
    loss = -float(logp[np.arange(n), y].mean())
    grad = softmax(logits, axis=1)
    grad[np.arange(n), y] -= 1.0
    return loss, grad / n


def mask_entropy(masks) -> float:
    """Mean over steps and rows of ``sum_j -M log(M + eps)``."""
    total = sum(float((-m * np.log(m + ENTROPY_EPS)).sum()) for m in masks)
    return total / (len(masks) * len(masks[0]))


def mask_entropy_grad(m, n_steps: int) -> np.ndarray:
    return -(np.log(m + ENTROPY_EPS) + m / (m + ENTROPY_EPS)) / (n_steps * len(m))
