"""Declarative experiment runner.

Pipeline for every (scenario, variant) arm, in this order:

    load -> missing policy -> split -> school statistics and relative GPAs
    (fit on train, applied to every part) -> feature group -> resample
    (training part only) -> encode (fit on train, applied to every part)
    -> fit each model -> evaluate on the untouched test part -> report

Variants: ``original`` and ``over-s`` delete incomplete rows before the
split and share that split; ``over-s`` additionally resamples the training
part.  ``imputed`` splits the full cohort with the same seed and fills
missing cells from training means and modes.

Per-stage seeds come from :func:`ontime.seeding.derive_seed` with these
stage names: ``"split"``, ``"resample/<scenario>"`` and
``"model/<scenario>/<variant>/<model>"``.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .features import (
    DERIVED,
    FIRST_YEAR_FEATURES,
    EncodingSpec,
    FeatureGroup,
    SchoolStats,
    add_relative_features,
    compute_school_stats,
    encode,
    fit_encoding,
    select_features,
)
from .metrics import (
    PUBLISHED_PREVALENCE,
    IDENTITY_TOLERANCE,
    confusion,
    f1,
    load_published_rows,
    negative_recall,
    p_incorrect_graduated,
    precision,
    recall,
    verify_table_identity,
)
from .models import (
    BoostParams,
    ForestParams,
    LogisticParams,
    NaiveBayesParams,
    TreeParams,
    fit_decision_tree,
    fit_gradient_boosting,
    fit_logistic_regression,
    fit_naive_bayes,
    fit_random_forest,
    model_from_json,
    model_to_json,
)
from .resampling import ResampleMode, RoseParams, random_oversample, rose_sample
from .seeding import derive_seed
from .synth import GenConfig, generate_cohort
from .tabnet import TabNetHyper, train_tabnet
from .tabular import (
    SCHOOL_KEY,
    Dataset,
    SplitSpec,
    canonical_schema,
    drop_missing,
    impute_simple,
    load_csv,
    split,
)

CONFIG_VERSION = 1
REPORT_SCHEMA_VERSION = 1
BUNDLE_VERSION = 1

ORIGINAL, OVERSAMPLED, IMPUTED = "original", "over-s", "imputed"
VARIANTS = (ORIGINAL, OVERSAMPLED, IMPUTED)
MISSING_POLICIES = ("drop", "impute_simple")

METRIC_LABELS = (
    ("recall", "Recall"),
    ("f1", "F1-score"),
    ("p_incorrect_graduated", "P(Incorrectly Predicted as graduated)"),
)


@dataclass(frozen=True)
class ModelEntry:
    display: str
    params_cls: type
    fit: object
    raw_input: bool = False
    needs_validation: bool = False


MODELS = {
    "decision_tree": ModelEntry("RCDT", TreeParams, fit_decision_tree),
    "random_forest": ModelEntry("Random Forest", ForestParams, fit_random_forest),
    "gradient_boosting": ModelEntry("Boosting", BoostParams, fit_gradient_boosting),
    "naive_bayes": ModelEntry("Naive Bayes", NaiveBayesParams, fit_naive_bayes, raw_input=True),
    "logistic_regression": ModelEntry("Logistic Reg.", LogisticParams, fit_logistic_regression),
    "tabnet": ModelEntry("TabNet", TabNetHyper, None, needs_validation=True),
}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the reason."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage


# configuration -------------------------------------------------------------


@dataclass(frozen=True)
class ResampleConfig:
    mode: ResampleMode = ResampleMode.ROSE
    p_minority: float = 0.5
    n_out: int | None = None
    shrink_minority: float = 1.0
    shrink_majority: float = 1.0

    def to_json(self) -> dict:
        return {"mode": self.mode.value, "p_minority": self.p_minority, "n_out": self.n_out,
                "shrink_minority": self.shrink_minority, "shrink_majority": self.shrink_majority}


@dataclass(frozen=True)
class ModelSpec:
    name: str
    params: dict = field(default_factory=dict)

    def build_params(self, seed: int | None = None):
        entry = MODELS[self.name]
        params = entry.params_cls(**self.params)
        if seed is not None and "seed" in {f.name for f in dataclasses.fields(params)}:
            params = dataclasses.replace(params, seed=seed)
        return params


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs.  Exactly one of ``input_csv`` / ``generate`` is set.

    ``split`` of ``None`` means 0.8/0.2, or 0.8/0.1/0.1 (train/validation/test)
    when TabNet is among the models.
    """

    models: tuple
    input_csv: str | None = None
    generate: GenConfig | None = None
    scenarios: tuple = (FeatureGroup.GROUP_I, FeatureGroup.GROUP_II)
    variants: tuple = (ORIGINAL, OVERSAMPLED)
    missing_policy: str = "drop"
    resample: ResampleConfig = ResampleConfig()
    split: tuple | None = None
    threshold: float = 0.5
    seed: int = 0
    output_dir: str = "out"
    min_school_n: int = 5
    save_models: tuple = ("tabnet",)

    def __post_init__(self):
        if (self.input_csv is None) == (self.generate is None):
            raise ConfigError("exactly one input source (csv or generate) is required")
        if not self.models:
            raise ConfigError("the model list is empty")
        names = [m.name for m in self.models]
        for name in names:
            if name not in MODELS:
                raise ConfigError(f"unknown model {name!r}; choose from {sorted(MODELS)}")
        if len(set(names)) != len(names):
            raise ConfigError("a model is listed twice")
        for m in self.models:
            try:
                m.build_params()
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad parameters for {m.name}: {exc}") from None
        if not self.scenarios:
            raise ConfigError("no scenarios requested")
        if not self.variants or any(v not in VARIANTS for v in self.variants):
            raise ConfigError(f"variants must be a non-empty subset of {VARIANTS}")
        if len(set(self.variants)) != len(self.variants):
            raise ConfigError("a variant is listed twice")
        if self.missing_policy not in MISSING_POLICIES:
            raise ConfigError(f"missing_policy must be one of {MISSING_POLICIES}")
        if OVERSAMPLED in self.variants and self.resample.mode is ResampleMode.NONE:
            raise ConfigError("the over-s variant needs a resample mode other than 'none'")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must lie strictly between 0 and 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        fractions = self.fractions
        try:
            SplitSpec(fractions, 0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if len(fractions) not in (2, 3):
            raise ConfigError("split must be train/test or train/validation/test")
        if self.needs_validation and (len(fractions) != 3 or fractions[1] <= 0):
            raise ConfigError("TabNet needs a validation fraction greater than zero")

    @property
    def needs_validation(self) -> bool:
        return any(MODELS[m.name].needs_validation for m in self.models)

    @property
    def fractions(self) -> tuple:
        if self.split is not None:
            return tuple(float(f) for f in self.split)
        return (0.8, 0.1, 0.1) if self.needs_validation else (0.8, 0.2)

    def to_json(self) -> dict:
        return {
            "version": CONFIG_VERSION,
            "input": ({"csv": self.input_csv} if self.input_csv is not None
                      else {"generate": self.generate.to_json()}),
            "scenarios": [FeatureGroup(s).value for s in self.scenarios],
            "variants": list(self.variants),
            "missing_policy": self.missing_policy,
            "resample": self.resample.to_json(),
            "models": [{"name": m.name, "params": dict(sorted(m.params.items()))} for m in self.models],
            "split": list(self.fractions),
            "threshold": self.threshold,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "min_school_n": self.min_school_n,
            "save_models": list(self.save_models),
        }

    @classmethod
    def from_json(cls, doc: dict, base_dir=None) -> "ExperimentConfig":
        """Build from a parsed config file; relative CSV paths resolve against ``base_dir``."""
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        if doc.get("version") != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {doc.get('version')!r}")
        known = {"version", "input", "scenarios", "variants", "missing_policy", "resample",
                 "models", "split", "threshold", "seed", "output_dir", "min_school_n", "save_models"}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        source = doc.get("input") or {}
        if not isinstance(source, dict) or len(source) != 1 or not set(source) <= {"csv", "generate"}:
            raise ConfigError("input must be {\"csv\": path} or {\"generate\": {...}}")
        csv_path, gen = None, None
        try:
            if "csv" in source:
                csv_path = str(source["csv"])
                if base_dir is not None and not os.path.isabs(csv_path):
                    csv_path = str(Path(base_dir) / csv_path)
            else:
                gen = GenConfig.from_json(source["generate"])
            resample = doc.get("resample", {})
            resample = ResampleConfig(
                mode=ResampleMode(resample.get("mode", "rose")),
                p_minority=float(resample.get("p_minority", 0.5)),
                n_out=resample.get("n_out"),
                shrink_minority=float(resample.get("shrink_minority", 1.0)),
                shrink_majority=float(resample.get("shrink_majority", 1.0)),
            )
            models = tuple(ModelSpec(m["name"], dict(m.get("params", {}))) if isinstance(m, dict)
                           else ModelSpec(str(m)) for m in doc.get("models", []))
            kwargs = dict(
                models=models,
                input_csv=csv_path,
                generate=gen,
                resample=resample,
            )
            if "scenarios" in doc:
                kwargs["scenarios"] = tuple(FeatureGroup(s) for s in doc["scenarios"])
            for key in ("variants", "save_models"):
                if key in doc:
                    kwargs[key] = tuple(doc[key])
            if doc.get("split") is not None:
                kwargs["split"] = tuple(doc["split"])
            for key, conv in (("missing_policy", str), ("threshold", float), ("seed", int),
                              ("output_dir", str), ("min_school_n", int)):
                if key in doc:
                    kwargs[key] = conv(doc[key])
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {str(path)!r}: {exc.strerror}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {str(path)!r} is not valid JSON: {exc}") from None
        return cls.from_json(doc, base_dir=path.parent)


# report --------------------------------------------------------------------


@dataclass(frozen=True)
class ReportRow:
    scenario: str
    variant: str
    model: str
    recall: float
    f1: float
    p_incorrect_graduated: float
    precision: float
    negative_recall: float
    n_train: int
    n_test: int
    train_prevalence: float
    test_prevalence: float

    def to_json(self) -> dict:
        return {k: _json_number(v) for k, v in dataclasses.asdict(self).items()}

    @classmethod
    def from_json(cls, doc: dict) -> "ReportRow":
        fields = {f.name: f.type for f in dataclasses.fields(cls)}
        out = {}
        for name in fields:
            v = doc[name]
            out[name] = math.nan if v is None else v
        return cls(**out)


def _json_number(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    return v


@dataclass(frozen=True)
class ExperimentReport:
    config: dict
    rows: tuple
    library_version: str
    data_fingerprint: str
    timings: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        """Deterministic content; wall times are kept out (see ``timings``)."""
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "library_version": self.library_version,
            "data_fingerprint": self.data_fingerprint,
            "config": self.config,
            "rows": [r.to_json() for r in self.rows],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentReport":
        if doc.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema version {doc.get('schema_version')!r}")
        return cls(doc["config"], tuple(ReportRow.from_json(r) for r in doc["rows"]),
                   doc["library_version"], doc["data_fingerprint"])

    def row(self, scenario: str, variant: str, model: str) -> ReportRow:
        for r in self.rows:
            if (r.scenario, r.variant, r.model) == (scenario, variant, model):
                return r
        raise KeyError((scenario, variant, model))


def report_tables(report: ExperimentReport) -> list[tuple[str, list[str]]]:
    """(scenario, variants) pairs, one per rendered table.

    Each non-original variant is shown next to ``original`` when both were
    run, so a full grid yields four tables.
    """
    tables = []
    variants = list(dict.fromkeys(r.variant for r in report.rows))
    for scenario in dict.fromkeys(r.scenario for r in report.rows):
        others = [v for v in variants if v != ORIGINAL]
        if ORIGINAL in variants:
            groups = [[ORIGINAL, v] for v in others] or [[ORIGINAL]]
        else:
            groups = [[v] for v in others]
        tables.extend((scenario, g) for g in groups)
    return tables


def _fmt(v: float) -> str:
    return "NA" if v is None or math.isnan(v) else f"{v:.4f}"


def render_report(report: ExperimentReport, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(report.to_json(), sort_keys=True, indent=2) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    models = list(dict.fromkeys(r.model for r in report.rows))
    label_w = max(len(label) for _, label in METRIC_LABELS)
    lines = [f"library {report.library_version}  data {report.data_fingerprint[:16]}", ""]
    for scenario, variants in report_tables(report):
        cell_w = max(9, *(len(v) + 2 for v in variants))
        group_w = cell_w * len(variants)
        lines.append(f"{scenario}: " + " vs ".join(variants))
        head = " " * label_w + "".join(
            f"  {MODELS[m].display if m in MODELS else m:<{group_w}}" for m in models)
        sub = " " * label_w + "".join(
            "  " + "".join(f"{v:<{cell_w}}" for v in variants) for _ in models)
        lines += [head.rstrip(), sub.rstrip()]
        for key, label in METRIC_LABELS:
            cells = []
            for m in models:
                vals = "".join(f"{_fmt(getattr(report.row(scenario, v, m), key)):<{cell_w}}"
                               for v in variants)
                cells.append("  " + vals)
            lines.append((f"{label:<{label_w}}" + "".join(cells)).rstrip())
        lines.append("")
    return "\n".join(lines)


# pipeline ------------------------------------------------------------------


def load_cohort(path) -> Dataset:
    """Read a canonical CSV, with or without the ``School_ID`` column."""
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as fh:
            header = fh.readline().rstrip("\r\n").split(",")
    except OSError as exc:
        raise FileNotFoundError(f"cannot read input CSV {str(path)!r}: {exc.strerror}") from None
    return load_csv(path, canonical_schema(with_school_id=SCHOOL_KEY in header))


@dataclass(frozen=True, eq=False)
class PreparedArm:
    """Encoded parts of one (scenario, variant) arm plus what produced them."""

    scenario: FeatureGroup
    variant: str
    train_raw: Dataset
    test_raw: Dataset
    train: object
    val: object
    test: object
    encoding: EncodingSpec
    stats: SchoolStats | None


def _stage(name):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(name, f"{type(exc).__name__}: {exc}") from exc
        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner
    return wrap


def _recomputes_derived(ds: Dataset) -> bool:
    return SCHOOL_KEY in ds.schema


@_stage("load")
def _load(cfg: ExperimentConfig) -> Dataset:
    if cfg.input_csv is not None:
        return load_cohort(cfg.input_csv)
    return generate_cohort(cfg.generate)[0]


@_stage("missing-policy")
def _missing_policy(ds: Dataset, variant: str, policy: str):
    """Returns ``(dataset, impute)``: rows to split and whether to impute after the split."""
    ignore = DERIVED if _recomputes_derived(ds) else ()
    if variant == IMPUTED or policy == "impute_simple":
        return ds, True
    out = drop_missing(ds, ignore=ignore)
    if out.n_rows == 0:
        raise ValueError("no complete rows remain after listwise deletion")
    return out, False


@_stage("split")
def _split(ds: Dataset, fractions, seed: int):
    parts = split(ds, SplitSpec(fractions, seed))
    if len(parts) == 2:
        train, test = parts
        val = None
    else:
        train, val, test = parts
    if train.n_rows == 0 or test.n_rows == 0:
        raise ValueError("train or test part is empty")
    return train, val, test


@_stage("impute")
def _impute(train, others):
    ignore = DERIVED if _recomputes_derived(train) else ()
    return [None if p is None else impute_simple(train, p, ignore=ignore) for p in [train, *others]]


@_stage("school-stats")
def _school_features(train, parts, min_school_n):
    if not _recomputes_derived(train):
        return None, parts
    stats = compute_school_stats(train, min_school_n)
    return stats, [None if p is None else add_relative_features(p, stats) for p in parts]


@_stage("resample")
def _resample(train: Dataset, rc: ResampleConfig, seed: int) -> Dataset:
    if rc.mode is ResampleMode.RANDOM_OVERSAMPLE:
        return random_oversample(train, rc.p_minority, seed)
    # default: twice the training size (14284 rows -> 28568)
    n_out = rc.n_out if rc.n_out is not None else 2 * train.n_rows
    return rose_sample(train, RoseParams(int(n_out), rc.p_minority, rc.shrink_minority,
                                         rc.shrink_majority, seed))


@_stage("encode")
def _encode(train, val, test, scenario):
    spec = fit_encoding(train)
    if scenario is FeatureGroup.GROUP_II:
        leaked = spec_sources(spec) & set(FIRST_YEAR_FEATURES)
        if leaked:
            raise AssertionError(f"Group II encoding uses first-year columns {sorted(leaked)}")
    return spec, encode(spec, train), None if val is None else encode(spec, val), encode(spec, test)


def spec_sources(spec: EncodingSpec) -> set:
    return {src for src, _ in spec.provenance}


def assert_no_leakage(test, *training_parts) -> None:
    """Fail if any test row id appears in a training, validation or resampled part."""
    test_ids = set(np.asarray(test.row_ids).tolist())
    for part in training_parts:
        if part is None:
            continue
        shared = test_ids.intersection(np.asarray(part.row_ids).tolist())
        if shared:
            raise AssertionError(f"{len(shared)} test rows leak into training data")


def prepare_arm(ds: Dataset, cfg: ExperimentConfig, scenario, variant: str) -> PreparedArm:
    scenario = FeatureGroup(scenario)
    data, impute = _missing_policy(ds, variant, cfg.missing_policy)
    train, val, test = _split(data, cfg.fractions, derive_seed(cfg.seed, "split"))
    if impute:
        train, val, test = _impute(train, [val, test])
    stats, (train, val, test) = _school_features(train, [train, val, test], cfg.min_school_n)
    train, test = select_features(train, scenario), select_features(test, scenario)
    val = None if val is None else select_features(val, scenario)
    if variant == OVERSAMPLED:
        train = _resample(train, cfg.resample, derive_seed(cfg.seed, f"resample/{scenario.value}"))
    try:
        assert_no_leakage(test, train, val)
    except AssertionError as exc:
        raise StageError("leakage-guard", str(exc)) from exc
    spec, enc_train, enc_val, enc_test = _encode(train, val, test, scenario)
    return PreparedArm(scenario, variant, train, test, enc_train, enc_val, enc_test, spec, stats)


@_stage("fit")
def _fit(spec: ModelSpec, arm: PreparedArm, seed: int):
    entry = MODELS[spec.name]
    params = spec.build_params(seed)
    if spec.name == "tabnet":
        return train_tabnet(arm.train, arm.val, params)[0]
    if entry.raw_input:
        if arm.scenario is FeatureGroup.GROUP_II:
            leaked = set(arm.train_raw.schema.predictors) & set(FIRST_YEAR_FEATURES)
            if leaked:
                raise AssertionError(f"Group II model sees first-year columns {sorted(leaked)}")
        return entry.fit(arm.train_raw, params, seed=seed)
    return entry.fit(arm.train, params=params, seed=seed)


@_stage("evaluate")
def _evaluate(model, spec: ModelSpec, arm: PreparedArm, threshold: float) -> ReportRow:
    data = arm.test_raw if MODELS[spec.name].raw_input else arm.test
    y_true = np.asarray(arm.test.labels)
    pred = model.predict(data, threshold)
    cm = confusion(y_true, pred)
    y_train = np.asarray(arm.train.labels)
    return ReportRow(
        scenario=arm.scenario.value, variant=arm.variant, model=spec.name,
        recall=recall(cm), f1=f1(cm), p_incorrect_graduated=p_incorrect_graduated(cm),
        precision=precision(cm), negative_recall=negative_recall(cm),
        n_train=int(len(y_train)), n_test=int(cm.total),
        train_prevalence=float(y_train.mean()), test_prevalence=float(cm.prevalence),
    )


def pipeline_bundle(arm: PreparedArm, model, input_has_school_id: bool) -> dict:
    """Everything needed to push new rows through a fitted arm."""
    return {
        "bundle_version": BUNDLE_VERSION,
        "scenario": arm.scenario.value,
        "variant": arm.variant,
        "school_id": input_has_school_id,
        "school_stats": None if arm.stats is None else arm.stats.to_json(),
        "encoding": arm.encoding.to_json(),
        "model": model_to_json(model),
    }


@dataclass(frozen=True, eq=False)
class RunResult:
    report: ExperimentReport
    bundles: dict


def run_experiment(cfg: ExperimentConfig, data: Dataset | None = None) -> RunResult:
    """Run every (scenario, variant, model) arm in configuration order.

    ``data`` overrides the configured input source (useful in tests).
    """
    ds = data if data is not None else _load(cfg)
    fingerprint = ds.fingerprint()
    rows, timings, bundles = [], {}, {}
    for scenario in cfg.scenarios:
        for variant in cfg.variants:
            arm = prepare_arm(ds, cfg, scenario, variant)
            for spec in cfg.models:
                key = f"{arm.scenario.value}/{variant}/{spec.name}"
                start = time.perf_counter()
                model = _fit(spec, arm, derive_seed(cfg.seed, f"model/{key}"))
                rows.append(_evaluate(model, spec, arm, cfg.threshold))
                timings[key] = time.perf_counter() - start
                if spec.name in cfg.save_models:
                    bundles[key] = pipeline_bundle(arm, model, _recomputes_derived(ds))
    report = ExperimentReport(cfg.to_json(), tuple(rows), __version__, fingerprint, timings)
    return RunResult(report, bundles)


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_outputs(result: RunResult, out_dir) -> list[Path]:
    """Write ``report.json``, ``report.txt``, ``timings.json`` and model bundles."""
    out = Path(out_dir)
    (out / "models").mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in (("report.json", render_report(result.report, "json")),
                       ("report.txt", render_report(result.report, "text")),
                       ("timings.json", json.dumps(result.report.timings, sort_keys=True, indent=2) + "\n")):
        _atomic_write(out / name, text)
        written.append(out / name)
    for key, bundle in result.bundles.items():
        path = out / "models" / (key.replace("/", "__") + ".json")
        _atomic_write(path, json.dumps(bundle, sort_keys=True))
        written.append(path)
    return written


def load_report(path) -> ExperimentReport:
    return ExperimentReport.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# bundles and masks -------------------------------------------------------------


def apply_bundle(bundle: dict, ds: Dataset):
    """Push raw rows through a saved arm; returns ``(model, encoded, kept_rows)``.

    Rows with a missing predictor are skipped (``kept_rows`` lists the ids
    that survive).
    """
    if bundle.get("bundle_version") != BUNDLE_VERSION:
        raise ValueError(f"unsupported bundle version {bundle.get('bundle_version')!r}")
    ignore = DERIVED if bundle["school_stats"] is not None else ()
    ds = drop_missing(ds, ignore=ignore)
    if bundle["school_stats"] is not None:
        ds = add_relative_features(ds, SchoolStats.from_json(bundle["school_stats"]))
    ds = select_features(ds, FeatureGroup(bundle["scenario"]))
    model = model_from_json(bundle["model"])
    spec = EncodingSpec.from_json(bundle["encoding"])
    return model, encode(spec, ds), np.asarray(ds.row_ids)


def inspect_masks(bundle: dict, ds: Dataset, max_rows: int | None = None) -> dict:
    """Per-step TabNet attention masks for ``ds`` under a saved bundle."""
    model, enc, ids = apply_bundle(bundle, ds)
    if not hasattr(model, "masks"):
        raise ValueError(f"model kind {bundle['model'].get('kind')!r} has no attention masks")
    if max_rows is not None:
        enc, ids = enc.take(np.arange(min(max_rows, enc.n_rows))), ids[:max_rows]
    masks = model.masks(enc)
    names = [src if lvl == "numeric" else f"{src}={lvl}" for src, lvl in enc.provenance]
    total = sum(masks)
    importance = total.sum(axis=0)
    importance = importance / importance.sum() if importance.sum() > 0 else importance
    return {
        "features": names,
        "row_ids": ids.tolist(),
        "masks": [m.tolist() for m in masks],
        "importance": dict(zip(names, importance.tolist())),
    }


# published identities --------------------------------------------------------


def verify_published_identities(rows=None, prevalence: float = PUBLISHED_PREVALENCE,
                            tolerance: float = IDENTITY_TOLERANCE):
    """Check ``P_err = (1 - recall) * prevalence`` for published rows.

    Returns ``(rows, checks, text)``; ``rows`` defaults to the shipped fixture.
    """
    rows = load_published_rows() if rows is None else list(rows)
    checks = verify_table_identity([(r.recall, r.p_err) for r in rows], prevalence, tolerance)
    lines = [f"{'table':<6}{'group':<9}{'variant':<10}{'model':<15}{'recall':>8}{'P_err':>8}"
             f"{'expected':>10}{'residual':>10}  result"]
    for r, c in zip(rows, checks):
        lines.append(f"{r.table:<6}{r.group:<9}{r.variant:<10}{r.model:<15}{r.recall:>8.4f}"
                     f"{r.p_err:>8.4f}{c.expected:>10.4f}{c.residual:>+10.4f}  "
                     f"{'pass' if c.passed else 'FAIL'}")
    n_pass = sum(c.passed for c in checks)
    lines.append(f"{n_pass}/{len(checks)} rows within {tolerance} of (1 - recall) * {prevalence}")
    return rows, checks, "\n".join(lines) + "\n"
