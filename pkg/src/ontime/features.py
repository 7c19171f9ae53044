"""Relative-GPA features, Group I / Group II predictor sets, and matrix encoding."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .tabular import (
    CATEGORICAL,
    SCHOOL_KEY,
    Dataset,
    SchemaError,
)

HS_GPA = "Highschool.GPA"
FIRST_YEAR_GPA = "1_YR_GPA"
REL_STUDENT = "Rel_Stud_GPA"
REL_SCHOOL = "Rel_School_GPA"
DERIVED = (REL_STUDENT, REL_SCHOOL)
MIN_SCHOOL_N = 5


def relative_student_gpa(hs_gpa, school_mean_hs_gpa):
    """High-school GPA relative to the mean GPA of admitted peers from the same school."""
    denom = np.asarray(school_mean_hs_gpa, dtype=np.float64)
    if np.any(denom <= 0) or np.any(np.isnan(denom)):
        raise ValueError("school mean high-school GPA must be positive")
    out = np.asarray(hs_gpa, dtype=np.float64) / denom
    return float(out) if out.ndim == 0 else out


def relative_school_gpa(mean_first_year, mean_hs):
    """Mean first-year college GPA of a school's students over their mean high-school GPA."""
    denom = np.asarray(mean_hs, dtype=np.float64)
    if np.any(denom <= 0) or np.any(np.isnan(denom)):
        raise ValueError("school mean high-school GPA must be positive")
    out = np.asarray(mean_first_year, dtype=np.float64) / denom
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SchoolStats:
    """Per-school GPA means plus global fallbacks.

    ``schools`` maps school id to ``(mean_hs, mean_first_year, n_students)``.
    Schools with fewer than ``min_school_n`` training rows are not stored and
    resolve to the global pair.
    """

    schools: dict
    global_hs: float
    global_first_year: float
    min_school_n: int = MIN_SCHOOL_N

    def lookup(self, school_ids) -> tuple[np.ndarray, np.ndarray]:
        hs = np.empty(len(school_ids))
        fy = np.empty(len(school_ids))
        for i, sid in enumerate(school_ids):
            entry = self.schools.get(sid)
            if entry is None:
                hs[i], fy[i] = self.global_hs, self.global_first_year
            else:
                hs[i], fy[i] = entry[0], entry[1]
        return hs, fy

    def to_json(self) -> dict:
        return {
            "schools": {k: list(v) for k, v in sorted(self.schools.items())},
            "global_hs": self.global_hs,
            "global_first_year": self.global_first_year,
            "min_school_n": self.min_school_n,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SchoolStats":
        schools = {k: (float(v[0]), float(v[1]), int(v[2])) for k, v in doc["schools"].items()}
        return cls(schools, float(doc["global_hs"]), float(doc["global_first_year"]),
                   int(doc["min_school_n"]))


def _observed(ds: Dataset, name: str) -> np.ndarray:
    return ~ds.missing[:, ds.schema.index(name)]


def compute_school_stats(train: Dataset, min_school_n: int = MIN_SCHOOL_N) -> SchoolStats:
    for name in (SCHOOL_KEY, HS_GPA, FIRST_YEAR_GPA):
        if name not in train.schema:
            raise SchemaError(f"school statistics need column {name!r}")
    if train.n_rows == 0:
        raise ValueError("cannot compute school statistics from an empty training set")
    sid = train[SCHOOL_KEY]
    hs, fy = train[HS_GPA], train[FIRST_YEAR_GPA]
    hs_ok, fy_ok = _observed(train, HS_GPA), _observed(train, FIRST_YEAR_GPA)
    if not hs_ok.any() or not fy_ok.any():
        raise ValueError("no observed GPA values for school statistics")
    schools = {}
    for school in sorted(set(sid[_observed(train, SCHOOL_KEY)])):
        rows = sid == school
        n = int(rows.sum())
        if n < min_school_n or not (rows & hs_ok).any() or not (rows & fy_ok).any():
            continue
        schools[school] = (float(hs[rows & hs_ok].mean()), float(fy[rows & fy_ok].mean()), n)
    return SchoolStats(schools, float(hs[hs_ok].mean()), float(fy[fy_ok].mean()), min_school_n)


def add_relative_features(ds: Dataset, stats: SchoolStats) -> Dataset:
    """Recompute ``Rel_Stud_GPA`` and ``Rel_School_GPA`` from ``stats``.

    Rows with a missing high-school GPA get a missing ``Rel_Stud_GPA``.
    """
    if SCHOOL_KEY not in ds.schema:
        raise SchemaError(f"relative GPA features need the {SCHOOL_KEY!r} column")
    mean_hs, mean_fy = stats.lookup(ds[SCHOOL_KEY])
    hs = np.where(_observed(ds, HS_GPA), ds[HS_GPA], np.nan)
    out = ds.with_column(REL_STUDENT, relative_student_gpa(hs, mean_hs))
    return out.with_column(REL_SCHOOL, relative_school_gpa(mean_fy, mean_hs))


class FeatureGroup(enum.Enum):
    GROUP_I = "GroupI"
    GROUP_II = "GroupII"


FIRST_YEAR_FEATURES = (FIRST_YEAR_GPA, REL_SCHOOL)


def select_features(ds: Dataset, group: FeatureGroup) -> Dataset:
    """Restrict ``ds`` to a predictor set; Group II has no first-year information."""
    group = FeatureGroup(group)
    for name in FIRST_YEAR_FEATURES:
        if group is FeatureGroup.GROUP_I and name not in ds.schema:
            raise SchemaError(f"Group I needs column {name!r}")
    if group is FeatureGroup.GROUP_I:
        return ds
    return ds.select([c for c in ds.schema.names if c not in FIRST_YEAR_FEATURES])


@dataclass(frozen=True)
class EncodingSpec:
    """Frozen encoding: ordered one-hot levels and (mean, std) per numeric column.

    ``entries`` holds ``("categorical", name, levels)`` or
    ``("numeric", name, mean, std)`` tuples in schema order.
    """

    entries: tuple
    dropped: tuple = ()
    label_map: dict = field(default_factory=lambda: {"N": 1, "Y": 0})

    @property
    def provenance(self) -> list[tuple[str, str]]:
        out = []
        for entry in self.entries:
            if entry[0] == CATEGORICAL:
                out.extend((entry[1], level) for level in entry[2])
            else:
                out.append((entry[1], "numeric"))
        return out

    @property
    def n_columns(self) -> int:
        return len(self.provenance)

    def to_json(self) -> dict:
        return {
            "entries": [list(e[:2]) + [list(e[2])] if e[0] == CATEGORICAL else list(e)
                        for e in self.entries],
            "dropped": list(self.dropped),
            "label_map": dict(self.label_map),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "EncodingSpec":
        entries = []
        for e in doc["entries"]:
            if e[0] == CATEGORICAL:
                entries.append((CATEGORICAL, e[1], tuple(e[2])))
            else:
                entries.append(("numeric", e[1], float(e[2]), float(e[3])))
        return cls(tuple(entries), tuple(doc["dropped"]), dict(doc["label_map"]))


@dataclass(frozen=True, eq=False)
class EncodedMatrix:
    values: np.ndarray
    labels: np.ndarray
    provenance: tuple
    row_ids: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    def take(self, index) -> "EncodedMatrix":
        index = np.asarray(index)
        return EncodedMatrix(self.values[index], self.labels[index], self.provenance,
                             self.row_ids[index])

    def source_columns(self) -> set[str]:
        return {src for src, _ in self.provenance}

    def numeric_columns(self) -> np.ndarray:
        return np.array([lvl == "numeric" for _, lvl in self.provenance])


def fit_encoding(train: Dataset) -> EncodingSpec:
    if train.n_rows == 0:
        raise ValueError("cannot fit an encoding on an empty dataset")
    if train.missing.any():
        raise ValueError("fit_encoding needs a missing-free training set")
    entries, dropped = [], []
    for col in train.schema.columns:
        if col.role != "predictor":
            continue
        if col.kind.kind == CATEGORICAL:
            entries.append((CATEGORICAL, col.name, col.kind.levels))
        elif col.kind.is_numeric:
            vals = np.asarray(train[col.name], dtype=np.float64)
            mean = float(vals.mean())
            std = float(vals.std())
            if std <= 0.0:
                dropped.append(col.name)
                continue
            entries.append(("numeric", col.name, mean, std))
    return EncodingSpec(tuple(entries), tuple(dropped))


def encode(spec: EncodingSpec, ds: Dataset) -> EncodedMatrix:
    """Standardize numerics and one-hot categoricals with training statistics."""
    n = ds.n_rows
    blocks = []
    for entry in spec.entries:
        name = entry[1]
        if name not in ds.schema:
            raise SchemaError(f"encoding expects column {name!r}")
        if ds.missing[:, ds.schema.index(name)].any():
            raise ValueError(f"column {name!r} has missing cells; encode needs complete data")
        if entry[0] == CATEGORICAL:
            levels = entry[2]
            lookup = {lvl: k for k, lvl in enumerate(levels)}
            block = np.zeros((n, len(levels)))
            for i, v in enumerate(ds[name]):
                k = lookup.get(v)
                if k is None:
                    raise ValueError(f"column {name!r}: level {v!r} unseen at fit time")
                block[i, k] = 1.0
        else:
            _, _, mean, std = entry
            block = ((np.asarray(ds[name], dtype=np.float64) - mean) / std)[:, None]
        blocks.append(block)
    values = np.hstack(blocks) if blocks else np.zeros((n, 0))
    labels = np.array([spec.label_map[v] for v in ds[ds.schema.target]], dtype=np.int64)
    return EncodedMatrix(values, labels, tuple(spec.provenance), ds.row_ids.copy())
