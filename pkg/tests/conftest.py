import numpy as np
import pytest

from ontime.synth import GenConfig, generate_cohort
from ontime.tabular import Column, Dataset, FeatureKind, Schema


@pytest.fixture(scope="session")
def cohort():
    """A small complete synthetic cohort with School_ID and derived columns."""
    return generate_cohort(GenConfig(n_students=3000, n_schools=60, seed=7))[0]


@pytest.fixture(scope="session")
def gappy_cohort():
    return generate_cohort(GenConfig(n_students=3000, n_schools=60, seed=8, missing_rate=0.3))[0]


def tiny_schema():
    return Schema((
        Column("x", FeatureKind.numeric()),
        Column("k", FeatureKind.integer((0, 10))),
        Column("c", FeatureKind.categorical(("a", "b", "c"))),
        Column("OTG", FeatureKind.categorical(("N", "Y")), "target"),
    ))


def tiny_dataset(n=12, seed=0):
    rng = np.random.default_rng(seed)
    y = np.array(["N", "Y"] * (n // 2), dtype=object)
    return Dataset.from_columns(tiny_schema(), {
        "x": rng.normal(size=n),
        "k": rng.integers(0, 11, size=n).astype(float),
        "c": rng.choice(["a", "b", "c"], size=n).astype(object),
        "OTG": y,
    })


def central_diff(f, x, eps=1e-6):
    """Central finite-difference gradient of scalar ``f`` at array ``x`` (modified in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        fp = f()
        x[i] = old - eps
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * eps)
    return g


def rel_err(a, b, floor=1e-7):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))
