"""Training-set rebalancing: random minority oversampling and ROSE.

Both samplers accept either a raw :class:`~ontime.tabular.Dataset` or an
:class:`~ontime.features.EncodedMatrix`; they never see test rows.  Rows
produced from a source row keep that row's id, so a leakage check can trace
every training row back to the original training split.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .features import EncodedMatrix
from .tabular import INTEGER, NUMERIC, Dataset, FeatureKind


class ResampleMode(enum.Enum):
    NONE = "none"
    RANDOM_OVERSAMPLE = "random"
    ROSE = "rose"


@dataclass(frozen=True)
class RoseParams:
    n_out: int
    p_minority: float = 0.5
    shrink_minority: float = 1.0
    shrink_majority: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_out < 1:
            raise ValueError("n_out must be at least 1")
        if not 0.0 < self.p_minority < 1.0:
            raise ValueError("p_minority must lie strictly between 0 and 1")
        if self.shrink_minority < 0 or self.shrink_majority < 0:
            raise ValueError("shrink factors must be non-negative")


def _labels(data) -> np.ndarray:
    return data.labels() if isinstance(data, Dataset) else np.asarray(data.labels)


def _class_split(y: np.ndarray) -> tuple[int, np.ndarray, np.ndarray]:
    """(minority label, minority row indices, majority row indices)."""
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("resampling needs both classes in the training set")
    if len(pos) < len(neg):
        return 1, pos, neg
    return 0, neg, pos


def random_oversample(data, p_minority: float = 0.5, seed: int = 0):
    """Append minority rows drawn with replacement until they make up ``p_minority``.

    The minority target is ``ceil(n_majority * p / (1 - p))`` rows; inputs that
    already reach it are returned unchanged.
    """
    if not 0.0 < p_minority < 1.0:
        raise ValueError("p_minority must lie strictly between 0 and 1")
    _, minority, majority = _class_split(_labels(data))
    target = math.ceil(len(majority) * p_minority / (1.0 - p_minority) - 1e-9)
    extra = target - len(minority)
    if extra <= 0:
        return data
    rng = np.random.default_rng(seed)
    drawn = minority[rng.integers(0, len(minority), size=extra)]
    return data.take(np.concatenate([np.arange(len(_labels(data))), drawn]))


def rose_bandwidth(class_matrix, shrink: float = 1.0) -> np.ndarray:
    """Per-column normal-reference bandwidths for one class.

    ``h_j = shrink * sigma_j * (4 / ((d + 2) n)) ** (1 / (d + 4))`` with
    ``sigma_j`` the population standard deviation of column ``j``.
    """
    x = np.asarray(class_matrix, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if n < 1 or d < 1:
        raise ValueError("bandwidth needs at least one row and one column")
    sigma = x.std(axis=0)
    return shrink * sigma * (4.0 / ((d + 2) * n)) ** (1.0 / (d + 4))


def _numeric_block(data) -> tuple[np.ndarray, list]:
    if isinstance(data, Dataset):
        names = [c.name for c in data.schema.columns if c.kind.is_numeric]
        block = np.column_stack([data[n] for n in names]) if names else np.zeros((len(data), 0))
        return block, names
    cols = np.flatnonzero(data.numeric_columns())
    return data.values[:, cols], list(cols)


def _relaxed(kind: FeatureKind) -> FeatureKind:
    # smoothed integers are no longer integral and may leave the score range
    if kind.kind in (NUMERIC, INTEGER):
        return FeatureKind.numeric()
    return kind


def rose_sample(train, params: RoseParams):
    """Smoothed-bootstrap sample of ``params.n_out`` rows (ROSE).

    Each row draws a class (minority with probability ``p_minority``), a seed
    row uniformly from that class, and Gaussian noise scaled by the class
    bandwidth on every numeric coordinate.  Categorical cells are copied.
    """
    y = _labels(train)
    minority_label, minority, majority = _class_split(y)
    block, handles = _numeric_block(train)
    if block.shape[1] and np.isnan(block).any():
        raise ValueError("ROSE needs complete numeric columns")
    rng = np.random.default_rng(params.seed)
    is_minority = rng.random(params.n_out) < params.p_minority
    source = np.empty(params.n_out, dtype=np.int64)
    k_min = int(is_minority.sum())
    source[is_minority] = minority[rng.integers(0, len(minority), size=k_min)]
    source[~is_minority] = majority[rng.integers(0, len(majority), size=params.n_out - k_min)]
    noise = rng.standard_normal((params.n_out, block.shape[1]))

    smoothed = block[source].copy()
    if block.shape[1]:
        h_min = rose_bandwidth(block[minority], params.shrink_minority)
        h_maj = rose_bandwidth(block[majority], params.shrink_majority)
        smoothed[is_minority] += noise[is_minority] * h_min
        smoothed[~is_minority] += noise[~is_minority] * h_maj

    out = train.take(source)
    if isinstance(out, Dataset):
        for j, name in enumerate(handles):
            out = out.with_column(name, smoothed[:, j], kind=_relaxed(out.schema[name].kind))
        return out
    values = out.values.copy()
    values[:, handles] = smoothed
    return EncodedMatrix(values, out.labels, out.provenance, out.row_ids)
