"""TabNet encoder with numpy forward/backward passes."""

from .layers import sparsemax, sparsemax_backward
from .network import TabNetEncoder, TabNetHyper, attentive_mask
from .optim import Adam, adam_step
from .training import EarlyStopping, TabNetDivergence, TabNetModel, train_tabnet

__all__ = [
    "Adam",
    "EarlyStopping",
    "TabNetDivergence",
    "TabNetEncoder",
    "TabNetHyper",
    "TabNetModel",
    "adam_step",
    "attentive_mask",
    "sparsemax",
    "sparsemax_backward",
    "train_tabnet",
]
