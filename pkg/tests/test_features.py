import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ontime.features import (
    FIRST_YEAR_FEATURES,
    EncodingSpec,
    FeatureGroup,
    SchoolStats,
    add_relative_features,
    compute_school_stats,
    encode,
    fit_encoding,
    relative_school_gpa,
    relative_student_gpa,
    select_features,
)
from ontime.tabular import SchemaError, canonical_schema, drop_missing

from conftest import tiny_dataset


@pytest.mark.parametrize("hs, mean, expected", [(3.2, 3.0, 1.07), (3.3, 3.5, 0.94)])
def test_relative_student_gpa_examples(hs, mean, expected):
    assert round(relative_student_gpa(hs, mean), 2) == expected


@pytest.mark.parametrize("fy, hs, expected", [(2.5, 3.8, 0.66), (2.5, 3.2, 0.78)])
def test_relative_school_gpa_examples(fy, hs, expected):
    assert round(relative_school_gpa(fy, hs), 2) == expected


def test_relative_gpa_rejects_non_positive_means():
    with pytest.raises(ValueError):
        relative_student_gpa(3.0, 0.0)
    with pytest.raises(ValueError):
        relative_school_gpa([2.5, 2.0], [3.0, -1.0])


def test_school_stats_are_training_means(cohort):
    stats = compute_school_stats(cohort, min_school_n=5)
    sid = cohort["School_ID"]
    for school, (hs, fy, n) in list(stats.schools.items())[:10]:
        rows = sid == school
        assert n == rows.sum() >= 5
        assert hs == pytest.approx(cohort["Highschool.GPA"][rows].mean(), abs=1e-12)
        assert fy == pytest.approx(cohort["1_YR_GPA"][rows].mean(), abs=1e-12)


def test_small_and_unseen_schools_fall_back_to_global(cohort):
    stats = compute_school_stats(cohort, min_school_n=5)
    counts = {s: int((cohort["School_ID"] == s).sum()) for s in set(cohort["School_ID"])}
    small = [s for s, c in counts.items() if c < 5]
    assert all(s not in stats.schools for s in small)
    hs, fy = stats.lookup(["S9999"])
    assert hs[0] == stats.global_hs and fy[0] == stats.global_first_year


def test_relative_student_gpa_averages_to_one_per_school(cohort):
    stats = compute_school_stats(cohort)
    out = add_relative_features(cohort, stats)
    for school in list(stats.schools)[:10]:
        rows = cohort["School_ID"] == school
        assert out["Rel_Stud_GPA"][rows].mean() == pytest.approx(1.0, abs=1e-12)


def test_test_rows_use_training_statistics(cohort):
    train, test = cohort.take(np.arange(2000)), cohort.take(np.arange(2000, 3000))
    stats = compute_school_stats(train)
    out = add_relative_features(test, stats)
    hs_mean, fy_mean = stats.lookup(test["School_ID"])
    assert np.allclose(out["Rel_Stud_GPA"], test["Highschool.GPA"] / hs_mean, rtol=0, atol=1e-15)
    assert np.allclose(out["Rel_School_GPA"], fy_mean / hs_mean, rtol=0, atol=1e-15)


def test_school_stats_json_round_trip(cohort):
    stats = compute_school_stats(cohort)
    assert SchoolStats.from_json(stats.to_json()) == stats


def test_missing_high_school_gpa_gives_missing_ratio(gappy_cohort):
    out = add_relative_features(gappy_cohort, compute_school_stats(gappy_cohort))
    j_hs, j_rel = out.schema.index("Highschool.GPA"), out.schema.index("Rel_Stud_GPA")
    assert np.array_equal(out.missing[:, j_hs], out.missing[:, j_rel])


def test_group_two_excludes_first_year_columns(cohort):
    g2 = select_features(cohort, FeatureGroup.GROUP_II)
    assert not set(FIRST_YEAR_FEATURES) & set(g2.schema.names)
    assert "Rel_Stud_GPA" in g2.schema.names
    assert select_features(cohort, "GroupI") is cohort
    with pytest.raises(SchemaError):
        select_features(g2, FeatureGroup.GROUP_I)


def test_encoding_one_hot_and_standardization(cohort):
    spec = fit_encoding(cohort)
    enc = encode(spec, cohort)
    numeric = enc.numeric_columns()
    assert np.allclose(enc.values[:, numeric].mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(enc.values[:, numeric].std(axis=0), 1.0, atol=1e-12)
    for name in ("Major", "Gender", "Faculty"):
        cols = [k for k, (src, _) in enumerate(enc.provenance) if src == name]
        assert np.all(enc.values[:, cols].sum(axis=1) == 1.0)
    assert "School_ID" not in enc.source_columns()
    assert np.array_equal(enc.labels, cohort.labels())
    # full one-hot width: every declared level gets a column
    n_levels = sum(len(c.kind.levels) for c in canonical_schema().columns
                   if c.role == "predictor" and c.kind.kind == "categorical")
    assert len(enc.provenance) == n_levels + numeric.sum()


def test_constant_numeric_column_is_dropped():
    ds = tiny_dataset(6)
    ds = ds.with_column("x", np.full(6, 2.0))
    spec = fit_encoding(ds)
    assert spec.dropped == ("x",)
    assert "x" not in encode(spec, ds).source_columns()


def test_encoding_needs_complete_rows(gappy_cohort):
    with pytest.raises(ValueError):
        fit_encoding(gappy_cohort)
    spec = fit_encoding(drop_missing(gappy_cohort))
    with pytest.raises(ValueError):
        encode(spec, gappy_cohort)


def test_encoding_json_round_trip(cohort):
    spec = fit_encoding(cohort)
    again = EncodingSpec.from_json(spec.to_json())
    assert again == spec
    assert np.array_equal(encode(again, cohort).values, encode(spec, cohort).values)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_test_rows_never_shift_the_encoding(seed):
    ds = tiny_dataset(20, seed)
    train, test = ds.take(np.arange(10)), ds.take(np.arange(10, 20))
    spec = fit_encoding(train)
    shifted = test.with_column("x", test["x"] + 100.0)
    assert fit_encoding(train) == spec
    a, b = encode(spec, test), encode(spec, shifted)
    x_col = [k for k, (s, _) in enumerate(spec.provenance) if s == "x"][0]
    assert np.allclose(b.values[:, x_col] - a.values[:, x_col], 100.0 / spec.entries[0][3])
