"""Synthetic student cohorts that conform to the canonical schema.

The generator is a stand-in for private registrar data: it produces the
same columns, realistic ranges, school structure, a tunable link between
features and not-on-time graduation, and MCAR missingness.  Nothing here is
fitted to real students.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .features import (
    FIRST_YEAR_GPA,
    HS_GPA,
    REL_SCHOOL,
    REL_STUDENT,
    add_relative_features,
    compute_school_stats,
)
from .seeding import rng_for
from .tabular import (
    EDUCATION_LEVELS,
    FACULTIES,
    GENDERS,
    INCOME_LEVELS,
    MAJORS,
    SCHOOL_KEY,
    SCHOOL_TYPES,
    SCORE_COLUMNS,
    TARGET_NAME,
    YEARS,
    Dataset,
    canonical_schema,
)

GENDER_P = (0.55, 0.45)
SCHOOL_TYPE_P = (0.35, 0.60, 0.05)
INCOME_P = (0.10, 0.15, 0.20, 0.25, 0.30)
EDUCATION_P = (0.03, 0.12, 0.30, 0.15, 0.28, 0.12)
# majors M01..M54 are assigned to faculties in contiguous blocks
FACULTY_OF_MAJOR = tuple(FACULTIES[min(i * 5 // 54, 4)] for i in range(54))

MISSING_PRONE = (
    HS_GPA,
    "FAMILY_INCOME",
    "EDUC_FATHER",
    "EDUC_MOTHER",
    "Aprov_English",
    "Aprov_Spanish",
)

DEFAULT_BETA = {
    "1_YR_GPA": -1.5,
    "Highschool.GPA": -0.6,
    "Apt_Math": -0.3,
    "Aprov_Math": -0.3,
    "Engineering": 0.5,
}


@dataclass(frozen=True)
class GenConfig:
    n_students: int = 24432
    n_schools: int = 250
    target_prevalence: float = 0.888
    signal_strength: float = 1.0
    missing_rate: float = 0.0
    beta: dict = field(default_factory=lambda: dict(DEFAULT_BETA))
    seed: int = 0
    emit_derived: bool = True
    min_school_n: int = 5

    def __post_init__(self):
        if not 0.0 < self.target_prevalence < 1.0:
            raise ValueError("target_prevalence must lie strictly between 0 and 1")
        if self.n_schools < 1 or self.n_students < 1:
            raise ValueError("need at least one school and one student")
        if self.signal_strength < 0:
            raise ValueError("signal_strength must be non-negative")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ValueError("missing_rate must lie in [0, 1)")
        unknown = set(self.beta) - set(DEFAULT_BETA)
        if unknown:
            raise ValueError(f"unknown coefficient names {sorted(unknown)}")

    def to_json(self) -> dict:
        return {
            "n_students": self.n_students,
            "n_schools": self.n_schools,
            "target_prevalence": self.target_prevalence,
            "signal_strength": self.signal_strength,
            "missing_rate": self.missing_rate,
            "beta": dict(sorted(self.beta.items())),
            "seed": self.seed,
            "emit_derived": self.emit_derived,
            "min_school_n": self.min_school_n,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GenConfig":
        return cls(**doc)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    ability: np.ndarray
    beta: dict
    intercept: float
    linear_score: np.ndarray
    probability: np.ndarray


class CalibrationError(RuntimeError):
    pass


def calibrate_intercept(linear_score, target_prevalence: float) -> float:
    """Intercept ``b0`` with ``mean(sigmoid(b0 + linear_score)) == target`` (bisection).

    ``linear_score`` already includes the signal-strength scaling.
    """
    if not 0.0 < target_prevalence < 1.0:
        raise ValueError("target prevalence must lie strictly between 0 and 1")
    score = np.asarray(linear_score, dtype=np.float64)
    if not np.any(score):
        return math.log(target_prevalence / (1.0 - target_prevalence))
    lo, hi = -30.0, 30.0

    def gap(b0):
        return float(expit(b0 + score).mean()) - target_prevalence

    if gap(lo) > 0 or gap(hi) < 0:
        raise CalibrationError("no intercept in [-30, 30] reaches the target prevalence")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gap(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    b0 = 0.5 * (lo + hi)
    if abs(gap(b0)) > 1e-4:
        raise CalibrationError(f"calibration residual {gap(b0):.3g} exceeds 1e-4")
    return b0


def per_cell_rate(row_rate: float, k: int) -> float:
    """Per-cell MCAR rate that leaves ``row_rate`` of rows with a missing cell among ``k`` columns."""
    return 1.0 - (1.0 - row_rate) ** (1.0 / k)


def inject_missing(ds: Dataset, rate: float, columns, seed: int = 0) -> Dataset:
    """Mask each cell of ``columns`` independently with probability ``rate``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("missing rate must lie in [0, 1)")
    columns = list(columns)
    if ds.schema.target in columns:
        raise ValueError("the target column is never masked")
    if rate == 0.0:
        return ds
    rng = np.random.default_rng(seed)
    out = ds
    for name in columns:
        hit = rng.random(ds.n_rows) < rate
        col = ds.schema[name]
        values = np.array(out[name], copy=True)
        values[hit] = np.nan if col.kind.is_numeric else ""
        # keep previously masked cells masked
        prior = out.missing[:, out.schema.index(name)]
        if col.kind.is_numeric:
            values[prior] = np.nan
        else:
            values[prior] = ""
        out = out.with_column(name, values)
    return out


def _z(x):
    sd = x.std()
    return (x - x.mean()) / sd if sd > 0 else np.zeros_like(x)


def generate_cohort(cfg: GenConfig) -> tuple[Dataset, GroundTruth]:
    """Draw a cohort; the result carries a ``School_ID`` key column."""
    n = cfg.n_students
    rng = rng_for(cfg.seed, "synth-structure")
    school_offset = rng.normal(0.0, 0.25, size=cfg.n_schools)
    school_type = rng.choice(len(SCHOOL_TYPES), size=cfg.n_schools, p=SCHOOL_TYPE_P)
    school_weight = rng.lognormal(0.0, 0.8, size=cfg.n_schools)
    school = rng.choice(cfg.n_schools, size=n, p=school_weight / school_weight.sum())

    rng = rng_for(cfg.seed, "synth-students")
    ability = rng.standard_normal(n)
    hs_gpa = np.clip(3.25 + school_offset[school] + 0.4 * ability + rng.normal(0, 0.2, n), 0.0, 4.0)
    hs_gpa = np.round(hs_gpa, 2)
    scores = {}
    for name in SCORE_COLUMNS:
        raw = 500 + 100 * (0.7 * ability + rng.normal(0, 0.7, n))
        scores[name] = np.clip(np.floor(raw + 0.5), 200, 800)
    fy_gpa = 2.6 + 0.6 * ability - 0.3 * school_offset[school] + rng.normal(0, 0.45, n)
    fy_gpa = np.round(np.clip(fy_gpa, 0.0, 4.3), 2)
    major = rng.integers(0, len(MAJORS), size=n)
    gender = rng.choice(len(GENDERS), size=n, p=GENDER_P)
    year = rng.integers(0, len(YEARS), size=n)
    income = rng.choice(len(INCOME_LEVELS), size=n, p=INCOME_P)
    educ_f = rng.choice(len(EDUCATION_LEVELS), size=n, p=EDUCATION_P)
    educ_m = rng.choice(len(EDUCATION_LEVELS), size=n, p=EDUCATION_P)
    faculty = np.array([FACULTY_OF_MAJOR[m] for m in major], dtype=object)

    design = {
        "1_YR_GPA": _z(fy_gpa),
        "Highschool.GPA": _z(hs_gpa),
        "Apt_Math": _z(scores["Apt_Math"]),
        "Aprov_Math": _z(scores["Aprov_Math"]),
        "Engineering": (faculty == "Engineering").astype(np.float64),
    }
    beta = {k: float(cfg.beta.get(k, 0.0)) for k in DEFAULT_BETA}
    linear = cfg.signal_strength * sum(beta[k] * design[k] for k in DEFAULT_BETA)
    b0 = calibrate_intercept(linear, cfg.target_prevalence)
    prob = expit(b0 + linear)
    label = rng_for(cfg.seed, "synth-labels").random(n) < prob

    nan = np.full(n, np.nan)
    columns = {
        SCHOOL_KEY: np.array([f"S{s + 1:04d}" for s in school], dtype=object),
        "Major": np.array([MAJORS[m] for m in major], dtype=object),
        "Faculty": faculty,
        "Gender": np.array([GENDERS[g] for g in gender], dtype=object),
        "Year": np.array([YEARS[y] for y in year], dtype=object),
        "School_Type": np.array([SCHOOL_TYPES[school_type[s]] for s in school], dtype=object),
        HS_GPA: hs_gpa,
        "FAMILY_INCOME": np.array([INCOME_LEVELS[i] for i in income], dtype=object),
        **scores,
        "EDUC_FATHER": np.array([EDUCATION_LEVELS[i] for i in educ_f], dtype=object),
        "EDUC_MOTHER": np.array([EDUCATION_LEVELS[i] for i in educ_m], dtype=object),
        FIRST_YEAR_GPA: fy_gpa,
        REL_STUDENT: nan,
        REL_SCHOOL: nan.copy(),
        TARGET_NAME: np.where(label, "N", "Y").astype(object),
    }
    ds = Dataset.from_columns(canonical_schema(with_school_id=True), columns)
    if cfg.emit_derived:
        ds = add_relative_features(ds, compute_school_stats(ds, cfg.min_school_n))
    if cfg.missing_rate > 0:
        rate = per_cell_rate(cfg.missing_rate, len(MISSING_PRONE))
        ds = inject_missing(ds, rate, MISSING_PRONE, seed=rng_for(cfg.seed, "synth-missing").integers(2**63))
        if cfg.emit_derived:
            # a masked high-school GPA leaves its ratio undefined
            hs_missing = ds.missing[:, ds.schema.index(HS_GPA)]
            ds = ds.with_column(REL_STUDENT, np.where(hs_missing, np.nan, ds[REL_STUDENT]))
    truth = GroundTruth(ability, beta, b0, linear, prob)
    return ds, truth
