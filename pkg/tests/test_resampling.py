import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ontime.features import encode, fit_encoding
from ontime.resampling import RoseParams, random_oversample, rose_bandwidth, rose_sample
from ontime.tabular import Column, Dataset, FeatureKind, Schema

SCHEMA = Schema((
    Column("x", FeatureKind.numeric()),
    Column("s", FeatureKind.integer((200, 800))),
    Column("c", FeatureKind.categorical(("a", "b"))),
    Column("OTG", FeatureKind.categorical(("N", "Y")), "target"),
))


def imbalanced(n=1000, p_pos=0.888, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.random(n) < p_pos
    return Dataset.from_columns(SCHEMA, {
        "x": np.where(y, 1.0, -1.0) + rng.normal(0, 2.0, n),
        "s": np.clip(np.round(rng.normal(500, 100, n)), 200, 800),
        "c": np.where(rng.random(n) < 0.3, "a", "b").astype(object),
        "OTG": np.where(y, "N", "Y").astype(object),
    })


def test_bandwidth_formula_reference_value():
    # sigma = 2 (population), n = 100, d = 1: 2 * (4 / 300) ** 0.2
    x = np.array([-2.0, 2.0] * 50)
    assert rose_bandwidth(x)[0] == pytest.approx(0.8433692126854999, rel=1e-14)
    assert rose_bandwidth(x, shrink=0.5)[0] == pytest.approx(0.8433692126854999 / 2, rel=1e-14)


def test_bandwidth_scales_each_column():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(500, 3)) * np.array([1.0, 10.0, 0.0])
    h = rose_bandwidth(x)
    factor = (4.0 / (5 * 500)) ** (1 / 7)
    assert np.allclose(h, x.std(axis=0) * factor, rtol=1e-14)
    assert h[2] == 0.0


def test_random_oversample_reaches_target():
    ds = imbalanced()
    out = random_oversample(ds, 0.5, seed=3)
    y = out.labels()
    majority = (ds.labels() == 1).sum()
    assert (y == 0).sum() == math.ceil(majority * 0.5 / 0.5)
    assert np.array_equal(out.row_ids[:ds.n_rows], ds.row_ids)
    assert set(out.row_ids[ds.n_rows:]) <= set(ds.row_ids[ds.labels() == 0])


def test_random_oversample_is_identity_when_balanced():
    ds = imbalanced(p_pos=0.5)
    out = random_oversample(ds, 0.1)
    assert out is ds


def test_rose_minority_fraction_over_seeds():
    ds = imbalanced()
    for seed in range(20):
        out = rose_sample(ds, RoseParams(20000, 0.5, seed=seed))
        assert abs((out.labels() == 0).mean() - 0.5) <= 0.02


def test_rose_with_zero_shrink_is_plain_resampling():
    ds = imbalanced()
    out = rose_sample(ds, RoseParams(5000, 0.5, 0.0, 0.0, seed=4))
    for name in ("x", "s"):
        assert np.max(np.abs(out[name] - ds[name][out.row_ids])) <= 1e-12
    assert np.array_equal(out["c"], ds["c"][out.row_ids])
    assert np.array_equal(out.labels(), ds.labels()[out.row_ids])


def test_rose_variance_adds_bandwidth_squared():
    ds = imbalanced(2000, seed=5)
    out = rose_sample(ds, RoseParams(50000, 0.5, seed=6))
    for label in (0, 1):
        src = ds["x"][ds.labels() == label]
        # both numeric columns enter the bandwidth, so d = 2
        h = rose_bandwidth(np.column_stack([src, ds["s"][ds.labels() == label]]))[0]
        got = out["x"][out.labels() == label].var()
        assert got == pytest.approx(src.var() + h * h, rel=0.10)


def test_rose_relaxes_integer_columns_and_keeps_categories():
    ds = imbalanced()
    out = rose_sample(ds, RoseParams(3000, 0.5, seed=1))
    assert out.schema["s"].kind.kind == "numeric"
    assert out.schema["s"].kind.bounds is None
    assert set(out["c"]) <= {"a", "b"}
    assert not np.all(out["s"] == np.round(out["s"]))


def test_rose_on_encoded_matrix_noises_numeric_columns_only():
    ds = imbalanced()
    enc = encode(fit_encoding(ds), ds)
    out = rose_sample(enc, RoseParams(4000, 0.5, seed=2))
    numeric = enc.numeric_columns()
    src = enc.values[np.searchsorted(enc.row_ids, out.row_ids)]
    assert np.array_equal(out.values[:, ~numeric], src[:, ~numeric])
    assert not np.allclose(out.values[:, numeric], src[:, numeric])
    assert np.array_equal(out.labels, enc.labels[np.searchsorted(enc.row_ids, out.row_ids)])


def test_rose_rejects_single_class_and_missing_cells():
    ds = imbalanced()
    only = ds.take(np.flatnonzero(ds.labels() == 1))
    with pytest.raises(ValueError):
        rose_sample(only, RoseParams(10))
    gappy = ds.with_column("x", np.where(np.arange(ds.n_rows) == 0, np.nan, ds["x"]))
    with pytest.raises(ValueError):
        rose_sample(gappy, RoseParams(10))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 0.9))
def test_resampled_rows_trace_back_to_training_rows(seed, p):
    ds = imbalanced(300, seed=seed % 7)
    for out in (rose_sample(ds, RoseParams(500, p, seed=seed)), random_oversample(ds, p, seed)):
        assert set(out.row_ids) <= set(ds.row_ids)
        assert np.array_equal(out.labels(), ds.labels()[out.row_ids])


def test_rose_is_seed_deterministic():
    ds = imbalanced()
    a = rose_sample(ds, RoseParams(1000, seed=9))
    b = rose_sample(ds, RoseParams(1000, seed=9))
    assert a.fingerprint() == b.fingerprint()
