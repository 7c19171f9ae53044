import math

import numpy as np
import pytest
from scipy.special import expit

from ontime.synth import (
    MISSING_PRONE,
    CalibrationError,
    GenConfig,
    calibrate_intercept,
    generate_cohort,
    inject_missing,
    per_cell_rate,
)
from ontime.tabular import drop_missing, validate, write_csv


def test_zero_signal_intercept_is_logit():
    b0 = calibrate_intercept(np.zeros(100), 0.888)
    assert b0 == math.log(0.888 / 0.112)
    assert b0 == pytest.approx(2.0704728716970755, abs=1e-15)


def test_calibration_hits_target_after_rescaling():
    rng = np.random.default_rng(0)
    score = rng.normal(size=20000)
    for scale in (1.0, 2.0, 4.0):
        b0 = calibrate_intercept(scale * score, 0.888)
        assert abs(expit(b0 + scale * score).mean() - 0.888) <= 1e-4


def test_calibration_bracket_failure():
    with pytest.raises(CalibrationError):
        calibrate_intercept(np.full(10, 100.0), 0.2)
    with pytest.raises(ValueError):
        calibrate_intercept(np.zeros(3), 1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        GenConfig(target_prevalence=1.0)
    with pytest.raises(ValueError):
        GenConfig(n_schools=0)
    with pytest.raises(ValueError):
        GenConfig(missing_rate=1.0)
    with pytest.raises(ValueError):
        GenConfig(beta={"Shoe_Size": 1.0})
    cfg = GenConfig(seed=4, signal_strength=2.0)
    assert GenConfig.from_json(cfg.to_json()) == cfg


def test_generated_cohort_is_valid_and_in_range(cohort):
    assert validate(cohort) == []
    assert cohort["Highschool.GPA"].max() <= 4.0
    assert cohort["1_YR_GPA"].max() <= 4.3
    for name in ("Apt_Verbal", "Aprov_Math", "Apt_Math", "Aprov_Spanish", "Aprov_English"):
        assert cohort[name].min() >= 200 and cohort[name].max() <= 800
    assert not cohort.missing.any()


def test_prevalence_within_tolerance_across_seeds():
    for seed in range(10):
        ds, truth = generate_cohort(GenConfig(n_students=20000, seed=seed))
        assert abs(ds.labels().mean() - 0.888) <= 0.01
        assert abs(truth.probability.mean() - 0.888) <= 1e-4


def test_same_seed_gives_identical_csv(tmp_path):
    cfg = GenConfig(n_students=500, seed=3, missing_rate=0.2)
    write_csv(generate_cohort(cfg)[0], tmp_path / "a.csv")
    write_csv(generate_cohort(cfg)[0], tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    write_csv(generate_cohort(GenConfig(n_students=500, seed=4))[0], tmp_path / "c.csv")
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "c.csv").read_bytes()


def test_zero_signal_labels_ignore_features():
    ds, truth = generate_cohort(GenConfig(n_students=20000, signal_strength=0.0, seed=2))
    assert np.all(truth.probability == truth.probability[0])
    y = ds.labels()
    low = ds["1_YR_GPA"] < np.median(ds["1_YR_GPA"])
    assert abs(y[low].mean() - y[~low].mean()) < 0.015


def test_default_coefficients_point_low_grades_to_not_on_time():
    ds, _ = generate_cohort(GenConfig(n_students=20000, seed=5))
    y = ds.labels()
    low = ds["1_YR_GPA"] < np.median(ds["1_YR_GPA"])
    assert y[low].mean() > y[~low].mean() + 0.05


def test_strong_signal_makes_bayes_rule_accurate():
    ds, truth = generate_cohort(GenConfig(n_students=20000, signal_strength=3.0, seed=6))
    y = ds.labels()
    pred = truth.probability >= 0.5
    assert pred[y == 1].mean() >= 0.97


def test_missing_rate_calibration_matches_listwise_deletion_size():
    rate = 1 - 17855 / 24432
    ds, _ = generate_cohort(GenConfig(n_students=24432, missing_rate=rate, seed=11))
    assert abs(drop_missing(ds).n_rows - 17855) <= 300
    k = len(MISSING_PRONE)
    assert (1 - per_cell_rate(rate, k)) ** k == pytest.approx(17855 / 24432)


def test_inject_missing_rates_and_guards(cohort):
    assert inject_missing(cohort, 0.0, ["Gender"]) is cohort
    big, _ = generate_cohort(GenConfig(n_students=10000, seed=1))
    out = inject_missing(big, 0.5, ["Gender"], seed=2)
    masked = out.missing[:, out.schema.index("Gender")].sum()
    assert abs(masked - 5000) <= 3 * math.sqrt(10000 * 0.25)
    others = [j for j, n in enumerate(out.schema.names) if n != "Gender"]
    assert not out.missing[:, others].any()
    with pytest.raises(ValueError):
        inject_missing(cohort, 0.1, ["OTG"])
    with pytest.raises(ValueError):
        inject_missing(cohort, 1.0, ["Gender"])


def test_derived_columns_can_be_left_empty():
    ds, _ = generate_cohort(GenConfig(n_students=200, emit_derived=False, seed=1))
    assert ds.missing[:, ds.schema.index("Rel_Stud_GPA")].all()
    assert ds.missing[:, ds.schema.index("Rel_School_GPA")].all()
