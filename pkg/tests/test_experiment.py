import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest

from ontime.experiment import (
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    ModelSpec,
    ReportRow,
    StageError,
    assert_no_leakage,
    inspect_masks,
    load_cohort,
    prepare_arm,
    render_report,
    report_tables,
    run_experiment,
    verify_published_identities,
    write_outputs,
)
from ontime.features import FIRST_YEAR_FEATURES
from ontime.metrics import PublishedRow
from ontime.synth import GenConfig, generate_cohort
from ontime.tabular import canonical_schema, write_csv

GOLDEN = Path(__file__).parent / "golden"

FAST_MODELS = (
    ModelSpec("decision_tree"),
    ModelSpec("random_forest", {"n_trees": 5}),
    ModelSpec("gradient_boosting", {"n_trees": 10}),
    ModelSpec("naive_bayes"),
    ModelSpec("logistic_regression"),
    ModelSpec("tabnet", {"max_epochs": 2, "batch_size": 256, "n_d": 4, "n_a": 4}),
)


def fast_config(**kw):
    base = dict(models=FAST_MODELS,
                generate=GenConfig(n_students=1500, n_schools=40, missing_rate=0.2, seed=3,
                                   signal_strength=2.0),
                variants=("original", "over-s", "imputed"), seed=5)
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def result():
    return run_experiment(fast_config())


# configuration -------------------------------------------------------------


def test_config_needs_exactly_one_input():
    with pytest.raises(ConfigError, match="exactly one"):
        ExperimentConfig(models=FAST_MODELS)
    with pytest.raises(ConfigError, match="exactly one"):
        ExperimentConfig(models=FAST_MODELS, input_csv="x.csv", generate=GenConfig())


def test_config_rejects_bad_model_lists():
    with pytest.raises(ConfigError, match="empty"):
        fast_config(models=())
    with pytest.raises(ConfigError, match="unknown model"):
        fast_config(models=(ModelSpec("svm"),))
    with pytest.raises(ConfigError, match="bad parameters"):
        fast_config(models=(ModelSpec("decision_tree", {"depth": 3}),))


def test_tabnet_needs_a_validation_fraction():
    with pytest.raises(ConfigError, match="validation"):
        fast_config(split=(0.8, 0.2))
    assert fast_config().fractions == (0.8, 0.1, 0.1)
    assert fast_config(models=FAST_MODELS[:2]).fractions == (0.8, 0.2)


def test_over_sampling_needs_a_resampler():
    from ontime.experiment import ResampleConfig
    from ontime.resampling import ResampleMode
    with pytest.raises(ConfigError):
        fast_config(resample=ResampleConfig(mode=ResampleMode.NONE))


def test_config_json_round_trip(tmp_path):
    cfg = fast_config()
    again = ExperimentConfig.from_json(json.loads(json.dumps(cfg.to_json())))
    assert again.to_json() == cfg.to_json()


def test_config_file_errors_name_the_path(tmp_path):
    with pytest.raises(ConfigError, match="nope.json"):
        ExperimentConfig.from_file(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError, match="not valid JSON"):
        ExperimentConfig.from_file(bad)
    bad.write_text(json.dumps({"version": 1, "models": ["tabnet"], "input": {"csv": "a"},
                               "colour": "blue"}))
    with pytest.raises(ConfigError, match="unknown config keys"):
        ExperimentConfig.from_file(bad)
    bad.write_text(json.dumps({"version": 2}))
    with pytest.raises(ConfigError, match="version"):
        ExperimentConfig.from_file(bad)


def test_relative_csv_paths_resolve_against_config(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps({"version": 1, "input": {"csv": "data.csv"},
                                "models": ["logistic_regression"]}))
    assert ExperimentConfig.from_file(path).input_csv == str(tmp_path / "data.csv")


# pipeline ------------------------------------------------------------------


def cohort_for(cfg):
    return generate_cohort(cfg.generate)[0]


def test_arms_share_a_split_and_never_leak():
    cfg = fast_config()
    ds = cohort_for(cfg)
    orig = prepare_arm(ds, cfg, "GroupI", "original")
    over = prepare_arm(ds, cfg, "GroupI", "over-s")
    imp = prepare_arm(ds, cfg, "GroupI", "imputed")
    assert np.array_equal(orig.test.row_ids, over.test.row_ids)
    assert imp.test.n_rows > orig.test.n_rows
    for arm in (orig, over, imp):
        test_ids = set(arm.test.row_ids.tolist())
        assert not test_ids & set(arm.train.row_ids.tolist())
        assert not test_ids & set(arm.val.row_ids.tolist())


def test_over_sampling_touches_training_only():
    cfg = fast_config()
    ds = cohort_for(cfg)
    orig = prepare_arm(ds, cfg, "GroupI", "original")
    over = prepare_arm(ds, cfg, "GroupI", "over-s")
    assert abs(over.train.labels.mean() - 0.5) < 0.05
    assert orig.train.labels.mean() > 0.8
    assert np.array_equal(orig.test.labels, over.test.labels)
    assert over.val.n_rows == orig.val.n_rows


def test_group_two_never_sees_first_year_columns():
    cfg = fast_config()
    arm = prepare_arm(cohort_for(cfg), cfg, "GroupII", "over-s")
    assert not {src for src, _ in arm.encoding.provenance} & set(FIRST_YEAR_FEATURES)
    assert not set(arm.train_raw.schema.predictors) & set(FIRST_YEAR_FEATURES)


def test_leakage_guard_raises():
    class Part:
        def __init__(self, ids):
            self.row_ids = np.array(ids)
    with pytest.raises(AssertionError, match="leak"):
        assert_no_leakage(Part([1, 2]), Part([0, 2]))
    assert_no_leakage(Part([1, 2]), Part([0, 3]), None)


def test_report_has_one_row_per_arm_and_model(result):
    rows = result.report.rows
    assert len(rows) == 2 * 3 * 6
    keys = [(r.scenario, r.variant, r.model) for r in rows]
    assert len(set(keys)) == len(keys)
    assert keys[0] == ("GroupI", "original", "decision_tree")
    for r in rows:
        assert r.p_incorrect_graduated == pytest.approx((1 - r.recall) * r.test_prevalence, abs=1e-12)


def test_over_sampled_training_prevalence_is_balanced(result):
    for r in result.report.rows:
        if r.variant == "over-s":
            assert abs(r.train_prevalence - 0.5) < 0.05
        else:
            assert r.train_prevalence > 0.8


def test_report_json_is_deterministic(result):
    again = run_experiment(fast_config())
    assert render_report(again.report, "json") == render_report(result.report, "json")


def test_report_json_to_text_round_trip(result):
    doc = json.loads(render_report(result.report, "json"))
    back = ExperimentReport.from_json(doc)
    assert render_report(back, "text") == render_report(result.report, "text")
    assert doc["schema_version"] == 1
    assert doc["data_fingerprint"] == cohort_for(fast_config()).fingerprint()


def test_full_grid_renders_four_tables(result):
    tables = report_tables(result.report)
    assert tables == [("GroupI", ["original", "over-s"]), ("GroupI", ["original", "imputed"]),
                      ("GroupII", ["original", "over-s"]), ("GroupII", ["original", "imputed"])]


def test_stage_errors_name_the_stage(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("nonsense\n1\n")
    cfg = fast_config(generate=None, input_csv=str(path))
    with pytest.raises(StageError, match="'load'") as info:
        run_experiment(cfg)
    assert info.value.stage == "load"


def test_csv_input_without_school_ids(tmp_path):
    ds = generate_cohort(GenConfig(n_students=800, n_schools=30, seed=2))[0]
    plain = ds.select(canonical_schema().names)
    path = tmp_path / "plain.csv"
    write_csv(plain, path)
    loaded = load_cohort(path)
    assert "School_ID" not in loaded.schema
    cfg = ExperimentConfig(models=(ModelSpec("logistic_regression"),), input_csv=str(path),
                           variants=("original",))
    report = run_experiment(cfg).report
    assert len(report.rows) == 2


def test_outputs_and_mask_inspection(result, tmp_path):
    written = write_outputs(result, tmp_path)
    names = {p.name for p in written}
    assert {"report.json", "report.txt", "timings.json"} <= names
    bundle_path = tmp_path / "models" / "GroupI__original__tabnet.json"
    bundle = json.loads(bundle_path.read_text())
    ds = cohort_for(fast_config())
    doc = inspect_masks(bundle, ds, max_rows=10)
    assert len(doc["row_ids"]) == 10
    masks = np.array(doc["masks"])
    assert masks.shape[:2] == (3, 10)
    assert np.allclose(masks.sum(axis=2), 1.0, atol=1e-9)
    assert sum(doc["importance"].values()) == pytest.approx(1.0)
    timings = json.loads((tmp_path / "timings.json").read_text())
    assert set(timings) == {f"{r.scenario}/{r.variant}/{r.model}" for r in result.report.rows}


def test_inspect_rejects_models_without_masks(result):
    bundle = dict(result.bundles["GroupI/original/tabnet"])
    bundle["model"] = {**bundle["model"], "kind": "logistic_regression", "intercept": 0.0,
                       "coef": [0.0], "params": {}, "converged": True, "n_iter": 0}
    with pytest.raises(ValueError, match="no attention masks"):
        inspect_masks(bundle, cohort_for(fast_config()), 5)


# rendering -----------------------------------------------------------------


def golden_report():
    rows = []
    values = {"decision_tree": (0.9676, 0.9367, 0.6013, 0.7427),
              "gradient_boosting": (0.9909, 0.9449, 0.8245, 0.8812)}
    for model, (r0, f0, r1, f1) in values.items():
        for variant, r, f in (("original", r0, f0), ("over-s", r1, f1)):
            rows.append(ReportRow("GroupI", variant, model, r, f, round((1 - r) * 0.888, 6),
                                  0.9, 0.5, 100, 50, 0.888, 0.888))
    return ExperimentReport({"version": 1, "note": "golden"}, tuple(rows), "0.0.0", "ab" * 32)


@pytest.mark.parametrize("fmt, name", [("text", "report.txt"), ("json", "report.json")])
def test_render_matches_golden_file(fmt, name):
    assert render_report(golden_report(), fmt) == (GOLDEN / name).read_text()


def test_render_rejects_unknown_format():
    with pytest.raises(ValueError):
        render_report(golden_report(), "html")


def test_nan_metrics_render_as_na():
    r = golden_report()
    row = dataclasses.replace(r.rows[0], f1=float("nan"))
    rep = dataclasses.replace(r, rows=(row,) + r.rows[1:])
    assert "NA" in render_report(rep, "text")
    assert json.loads(render_report(rep, "json"))["rows"][0]["f1"] is None


# published identities ----------------------------------------------------------


def test_verify_reports_every_fixture_row():
    rows, checks, text = verify_published_identities()
    assert len(rows) == len(checks) == 30
    assert text.count("\n") == 32


def test_verify_flags_a_perturbed_row():
    row = PublishedRow("2", "GroupI", "Boosting", "original", 0.9909, 0.9449, 0.0081)
    bumped = dataclasses.replace(row, p_err=row.p_err + 0.01)
    _, checks, _ = verify_published_identities([row, bumped])
    assert [c.passed for c in checks] == [True, False]


def test_rose_output_defaults_to_twice_the_training_size():
    cfg = fast_config()
    ds = cohort_for(cfg)
    orig = prepare_arm(ds, cfg, "GroupI", "original")
    over = prepare_arm(ds, cfg, "GroupI", "over-s")
    assert over.train_raw.n_rows == 2 * orig.train_raw.n_rows
