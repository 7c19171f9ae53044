"""TabNet encoder for binary classification with a hand-written backward pass.

Parameter layout (names in ``TabNetEncoder.params``):

* ``input_bn.gamma`` / ``input_bn.beta``
* ``shared{0,1}.{W,b,gamma,beta}``: the two GLU blocks shared by every
  feature transformer
* ``ft{k}.block{0,1}.{W,b,gamma,beta}``: step-specific GLU blocks, ``k = 0``
  being the initial splitter that produces the first attention input
* ``att{k}.{W,b,gamma,beta}`` for ``k = 1..n_steps``
* ``final.W`` / ``final.b``

Batch-norm running statistics live in ``TabNetEncoder.buffers``.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass

import numpy as np

from . import layers as L


@dataclass(frozen=True)
class TabNetHyper:
    n_steps: int = 3
    n_d: int = 8
    n_a: int = 8
    gamma: float = 1.3
    batch_size: int = 1024
    lr: float = 0.01
    max_epochs: int = 200
    patience: int = 20
    lambda_sparse: float = 0.0
    momentum: float = 0.02
    bn_eps: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")
        if self.gamma < 1.0:
            raise ValueError("gamma must be at least 1")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.n_d < 1 or self.n_a < 1 or self.batch_size < 2:
            raise ValueError("widths must be positive and batch_size at least 2")


def attentive_mask(a, prior, W, b, bn_gamma, bn_beta, running_mean, running_var, *,
                   relax: float, train: bool, momentum=0.02, eps=1e-5, update=True):
    """``mask = sparsemax(prior * BN(FC(a)))`` and ``new_prior = prior * (relax - mask)``."""
    if prior.shape[1] != W.shape[1] or a.shape[1] != W.shape[0]:
        raise ValueError("attentive transformer shape mismatch")
    z, c_fc = L.fc_forward(a, W, b)
    zb, c_bn = L.bn_forward(z, bn_gamma, bn_beta, running_mean, running_var, train=train,
                            momentum=momentum, eps=eps, update=update)
    mask = L.sparsemax(zb * prior)
    return mask, prior * (relax - mask), (c_fc, c_bn, zb, prior, mask)


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class TabNetEncoder:
    def __init__(self, n_features: int, hyper: TabNetHyper, n_classes: int = 2):
        self.n_features = n_features
        self.hyper = hyper
        self.n_classes = n_classes
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        rng = np.random.default_rng(hyper.seed)
        d, width = n_features, hyper.n_d + hyper.n_a
        self._bn("input_bn", d)
        # shared blocks share their FC layer; each step keeps its own batch norm
        # because the masked inputs it sees differ from step to step
        self._fc("shared0", d, width, rng)
        self._fc("shared1", width, width, rng)
        for k in range(hyper.n_steps + 1):
            self._bn(f"ft{k}.shared0", 2 * width)
            self._bn(f"ft{k}.shared1", 2 * width)
            self._glu(f"ft{k}.block0", width, width, rng)
            self._glu(f"ft{k}.block1", width, width, rng)
        for k in range(1, hyper.n_steps + 1):
            self.params[f"att{k}.W"] = _glorot(rng, hyper.n_a, d)
            self.params[f"att{k}.b"] = np.zeros(d)
            self._bn(f"att{k}", d)
        self.params["final.W"] = _glorot(rng, hyper.n_d, n_classes)
        self.params["final.b"] = np.zeros(n_classes)

    def _bn(self, prefix, width):
        self.params[f"{prefix}.gamma"] = np.ones(width)
        self.params[f"{prefix}.beta"] = np.zeros(width)
        self.buffers[f"{prefix}.running_mean"] = np.zeros(width)
        self.buffers[f"{prefix}.running_var"] = np.ones(width)

    def _fc(self, prefix, w_in, w_out, rng):
        self.params[f"{prefix}.W"] = _glorot(rng, w_in, 2 * w_out)
        self.params[f"{prefix}.b"] = np.zeros(2 * w_out)

    def _glu(self, prefix, w_in, w_out, rng):
        self._fc(prefix, w_in, w_out, rng)
        self._bn(prefix, 2 * w_out)

    def copy(self) -> "TabNetEncoder":
        return copy.deepcopy(self)

    # forward ---------------------------------------------------------------

    def _bn_args(self, prefix):
        p, bf = self.params, self.buffers
        return (p[f"{prefix}.gamma"], p[f"{prefix}.beta"]), \
            (bf[f"{prefix}.running_mean"], bf[f"{prefix}.running_var"])

    def _block(self, x, fc, bn, is_first, train, update):
        bn_p, bn_s = self._bn_args(bn)
        return L.glu_forward(x, self.params[f"{fc}.W"], self.params[f"{fc}.b"], bn_p, bn_s,
                             train=train, is_first=is_first, update=update,
                             momentum=self.hyper.momentum, eps=self.hyper.bn_eps)

    def _transformer(self, x, k, train, update):
        caches = []
        h = x
        for fc, bn, first in (("shared0", f"ft{k}.shared0", True),
                              ("shared1", f"ft{k}.shared1", False),
                              (f"ft{k}.block0", f"ft{k}.block0", False),
                              (f"ft{k}.block1", f"ft{k}.block1", False)):
            h, c = self._block(h, fc, bn, first, train, update)
            caches.append((fc, bn, c))
        return h, caches

    def forward(self, X, train: bool = False, update: bool = True):
        """Returns ``(logits, masks, sparse_reg, cache)``.

        ``train`` selects batch statistics for batch norm; ``update`` (train
        mode only) controls whether running statistics move.
        """
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected input of width {self.n_features}, got {X.shape}")
        hp = self.hyper
        bn_p, bn_s = self._bn_args("input_bn")
        f, c_in = L.bn_forward(X, bn_p[0], bn_p[1], bn_s[0], bn_s[1], train=train,
                               momentum=hp.momentum, eps=hp.bn_eps, update=update)
        h0, c_ft0 = self._transformer(f, 0, train, update)
        a = h0[:, hp.n_d:]
        prior = np.ones_like(f)
        agg = np.zeros((len(X), hp.n_d))
        steps, masks = [], []
        for k in range(1, hp.n_steps + 1):
            bn_p, bn_s = self._bn_args(f"att{k}")
            mask, new_prior, c_att = attentive_mask(
                a, prior, self.params[f"att{k}.W"], self.params[f"att{k}.b"], bn_p[0], bn_p[1],
                bn_s[0], bn_s[1], relax=hp.gamma, train=train, momentum=hp.momentum,
                eps=hp.bn_eps, update=update)
            h, c_ft = self._transformer(mask * f, k, train, update)
            dec, c_relu = L.relu_forward(h[:, :hp.n_d])
            agg = agg + dec
            steps.append((c_att, c_ft, c_relu))
            masks.append(mask)
            prior, a = new_prior, h[:, hp.n_d:]
        logits, c_final = L.fc_forward(agg, self.params["final.W"], self.params["final.b"])
        sparse_reg = L.mask_entropy(masks)
        return logits, masks, sparse_reg, (f, c_in, c_ft0, steps, c_final)

    # backward --------------------------------------------------------------

    def _add(self, grads, prefix, **named):
        for name, g in named.items():
            key = f"{prefix}.{name}"
            if key in grads:
                grads[key] = grads[key] + g
            else:
                grads[key] = g

    def _transformer_backward(self, g, caches, grads):
        for fc, bn, c in reversed(caches):
            g, dW, db, dgamma, dbeta = L.glu_backward(g, c, self.params[f"{fc}.W"])
            self._add(grads, fc, W=dW, b=db)
            self._add(grads, bn, gamma=dgamma, beta=dbeta)
        return g

    def backward(self, cache, dlogits, dsparse: float = 0.0):
        """Gradients of all parameters (and of the input batch, key ``"input"``)."""
        hp = self.hyper
        f, c_in, c_ft0, steps, c_final = cache
        grads: dict[str, np.ndarray] = {}
        dagg, dW, db = L.fc_backward(dlogits, c_final, self.params["final.W"])
        self._add(grads, "final", W=dW, b=db)
        df = np.zeros_like(f)
        da = np.zeros((len(f), hp.n_a))
        dprior_out = np.zeros_like(f)
        for k in range(hp.n_steps, 0, -1):
            c_att, c_ft, c_relu = steps[k - 1]
            c_fc, c_bn, zb, prior, mask = c_att
            dh = np.hstack([L.relu_backward(dagg, c_relu), da])
            dxm = self._transformer_backward(dh, c_ft, grads)
            dmask = dxm * f - dprior_out * prior
            df += dxm * mask
            if dsparse:
                dmask = dmask + dsparse * L.mask_entropy_grad(mask, hp.n_steps)
            dprior = dprior_out * (hp.gamma - mask)
            dzp = L.sparsemax_backward(mask, dmask)
            dprior = dprior + dzp * zb
            dz, dgamma, dbeta = L.bn_backward(dzp * prior, c_bn)
            da, dW, db = L.fc_backward(dz, c_fc, self.params[f"att{k}.W"])
            self._add(grads, f"att{k}", W=dW, b=db, gamma=dgamma, beta=dbeta)
            dprior_out = dprior
        dh0 = np.hstack([np.zeros((len(f), hp.n_d)), da])
        df += self._transformer_backward(dh0, c_ft0, grads)
        dx, dgamma, dbeta = L.bn_backward(df, c_in)
        self._add(grads, "input_bn", gamma=dgamma, beta=dbeta)
        grads["input"] = dx
        return grads

    def loss_and_grads(self, X, y, lambda_sparse: float = 0.0, update: bool = True):
        logits, masks, sparse_reg, cache = self.forward(X, train=True, update=update)
        ce, dlogits = L.cross_entropy(logits, y)
        grads = self.backward(cache, dlogits, lambda_sparse)
        return ce + lambda_sparse * sparse_reg, grads

    def predict_proba(self, X) -> np.ndarray:
        logits = self.forward(X, train=False)[0]
        return L.softmax(logits, axis=1)

    # persistence -------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "hyper": asdict(self.hyper),
            "params": {k: v.tolist() for k, v in sorted(self.params.items())},
            "buffers": {k: v.tolist() for k, v in sorted(self.buffers.items())},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TabNetEncoder":
        enc = cls(int(doc["n_features"]), TabNetHyper(**doc["hyper"]), int(doc["n_classes"]))
        for k, v in doc["params"].items():
            enc.params[k] = np.asarray(v, dtype=np.float64).reshape(enc.params[k].shape)
        for k, v in doc["buffers"].items():
            enc.buffers[k] = np.asarray(v, dtype=np.float64).reshape(enc.buffers[k].shape)
        return enc
