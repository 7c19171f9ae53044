"""Typed student-record tables: schema, CSV I/O, validation, cleaning, splits.

A :class:`Dataset` stores one numpy array per column.  Numeric and integer
columns are ``float64`` with ``NaN`` in missing cells; categorical and key
columns are ``object`` arrays of ``str`` with ``""`` in missing cells.  The
authoritative missingness record is the boolean ``missing`` mask.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

NUMERIC = "numeric"
INTEGER = "integer"
CATEGORICAL = "categorical"
IDENTIFIER = "identifier"

PREDICTOR = "predictor"
TARGET = "target"
KEY = "key"

MISSING_TOKENS = ("", "NA")
TARGET_NAME = "OTG"
SCHOOL_KEY = "School_ID"


class SchemaError(ValueError):
    """Header or column set does not match the schema."""


class ParseError(ValueError):
    """A cell could not be parsed, or the parsed table violates the schema."""


@dataclass(frozen=True)
class FeatureKind:
    kind: str
    levels: tuple[str, ...] = ()
    bounds: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in (NUMERIC, INTEGER, CATEGORICAL, IDENTIFIER):
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if not self.levels:
                raise ValueError("categorical level list must be non-empty")
            if len(set(self.levels)) != len(self.levels):
                raise ValueError(f"duplicate categorical levels in {self.levels}")

    @classmethod
    def numeric(cls, bounds=None):
        return cls(NUMERIC, bounds=None if bounds is None else (float(bounds[0]), float(bounds[1])))

    @classmethod
    def integer(cls, bounds=None):
        return cls(INTEGER, bounds=None if bounds is None else (float(bounds[0]), float(bounds[1])))

    @classmethod
    def categorical(cls, levels: Iterable[str]):
        return cls(CATEGORICAL, levels=tuple(levels))

    @classmethod
    def identifier(cls):
        return cls(IDENTIFIER)

    @property
    def is_numeric(self) -> bool:
        return self.kind in (NUMERIC, INTEGER)

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.levels:
            out["levels"] = list(self.levels)
        if self.bounds is not None:
            out["bounds"] = list(self.bounds)
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "FeatureKind":
        bounds = doc.get("bounds")
        return cls(doc["kind"], tuple(doc.get("levels", ())),
                   None if bounds is None else (float(bounds[0]), float(bounds[1])))


@dataclass(frozen=True)
class Column:
    name: str
    kind: FeatureKind
    role: str = PREDICTOR


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        targets = [c for c in self.columns if c.role == TARGET]
        if len(targets) != 1:
            raise SchemaError(f"schema needs exactly one target column, got {len(targets)}")
        if targets[0].kind.kind != CATEGORICAL or set(targets[0].kind.levels) != {"Y", "N"}:
            raise SchemaError("target must be categorical with levels {Y, N}")

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def target(self) -> str:
        return next(c.name for c in self.columns if c.role == TARGET)

    @property
    def predictors(self) -> list[str]:
        return [c.name for c in self.columns if c.role == PREDICTOR]

    def __contains__(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def __getitem__(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def drop(self, names: Iterable[str]) -> "Schema":
        names = set(names)
        return Schema(tuple(c for c in self.columns if c.name not in names))

    def replace_kind(self, name: str, kind: FeatureKind) -> "Schema":
        return Schema(tuple(Column(c.name, kind, c.role) if c.name == name else c
                            for c in self.columns))

    def to_json(self) -> list:
        return [{"name": c.name, "role": c.role, **c.kind.to_json()} for c in self.columns]

    @classmethod
    def from_json(cls, doc: list) -> "Schema":
        return cls(tuple(Column(d["name"], FeatureKind.from_json(d), d["role"]) for d in doc))


MAJORS = tuple(f"M{i:02d}" for i in range(1, 55))
FACULTIES = (
    "Agricultural Sciences",
    "Arts and Sciences - Art",
    "Arts and Sciences - Sciences",
    "Engineering",
    "Business Administration",
)
GENDERS = ("Female", "Male")
YEARS = tuple(str(y) for y in range(1999, 2011))
SCHOOL_TYPES = ("Private", "Public", "Other")
INCOME_LEVELS = (">=50000", "30000-49999", "20000-29999", "12500-19999", "<12500")
EDUCATION_LEVELS = (
    "No education",
    "Less than high school",
    "High school",
    "Associate or less",
    "College",
    "Graduate",
)
SCORE_COLUMNS = ("Apt_Verbal", "Aprov_Math", "Apt_Math", "Aprov_Spanish", "Aprov_English")
SCORE_BOUNDS = (200.0, 800.0)
GPA_BOUNDS = (0.0, 4.3)


def canonical_schema(with_school_id: bool = False) -> Schema:
    """The 18-column student-record schema, optionally keyed by ``School_ID``.

    The school key is not a predictor; it only feeds the relative-GPA
    features and is ignored by encoding and models.
    """
    cols = [
        Column("Major", FeatureKind.categorical(MAJORS)),
        Column("Faculty", FeatureKind.categorical(FACULTIES)),
        Column("Gender", FeatureKind.categorical(GENDERS)),
        Column("Year", FeatureKind.categorical(YEARS)),
        Column("School_Type", FeatureKind.categorical(SCHOOL_TYPES)),
        Column("Highschool.GPA", FeatureKind.numeric(GPA_BOUNDS)),
        Column("FAMILY_INCOME", FeatureKind.categorical(INCOME_LEVELS)),
    ]
    cols += [Column(name, FeatureKind.integer(SCORE_BOUNDS)) for name in SCORE_COLUMNS]
    cols += [
        Column("EDUC_FATHER", FeatureKind.categorical(EDUCATION_LEVELS)),
        Column("EDUC_MOTHER", FeatureKind.categorical(EDUCATION_LEVELS)),
        Column("1_YR_GPA", FeatureKind.numeric(GPA_BOUNDS)),
        Column("Rel_Stud_GPA", FeatureKind.numeric()),
        Column("Rel_School_GPA", FeatureKind.numeric()),
        Column(TARGET_NAME, FeatureKind.categorical(("Y", "N")), TARGET),
    ]
    if with_school_id:
        cols.insert(0, Column(SCHOOL_KEY, FeatureKind.identifier(), KEY))
    return Schema(tuple(cols))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    schema: Schema
    columns: dict
    missing: np.ndarray
    row_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.missing)
        if self.missing.shape != (n, len(self.schema.columns)):
            raise ValueError(f"missing mask shape {self.missing.shape} does not match "
                             f"{len(self.schema.columns)} columns")
        if set(self.columns) != set(self.schema.names):
            raise SchemaError("column arrays do not match schema names")
        for name, arr in self.columns.items():
            if len(arr) != n:
                raise ValueError(f"column {name!r} has length {len(arr)}, expected {n}")
        ids = np.arange(n, dtype=np.int64) if self.row_ids is None else np.asarray(self.row_ids, dtype=np.int64)
        if len(ids) != n:
            raise ValueError("row_ids length mismatch")
        object.__setattr__(self, "row_ids", _frozen(ids))
        object.__setattr__(self, "missing", _frozen(self.missing.astype(bool)))
        object.__setattr__(self, "columns", {k: _frozen(self.columns[k]) for k in self.schema.names})

    @classmethod
    def from_columns(cls, schema: Schema, columns: dict, row_ids=None) -> "Dataset":
        """Build a dataset, deriving the missing mask from NaN / empty cells."""
        arrays = {}
        mask = np.zeros((len(next(iter(columns.values()))), len(schema.columns)), dtype=bool)
        for j, col in enumerate(schema.columns):
            values = columns[col.name]
            if col.kind.is_numeric:
                arr = np.asarray(values, dtype=np.float64).copy()
                mask[:, j] = np.isnan(arr)
            else:
                arr = np.array(["" if v is None else str(v) for v in values], dtype=object)
                mask[:, j] = arr == ""
            arrays[col.name] = arr
        return cls(schema, arrays, mask, row_ids)

    def __len__(self) -> int:
        return len(self.missing)

    @property
    def n_rows(self) -> int:
        return len(self.missing)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def take(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(self.schema, {k: v[index] for k, v in self.columns.items()},
                       self.missing[index], self.row_ids[index])

    def select(self, names: Sequence[str]) -> "Dataset":
        keep = [n for n in self.schema.names if n in set(names)]
        schema = Schema(tuple(self.schema[n] for n in keep))
        idx = [self.schema.index(n) for n in keep]
        return Dataset(schema, {n: self.columns[n] for n in keep}, self.missing[:, idx], self.row_ids)

    def with_column(self, name: str, values: np.ndarray, kind: FeatureKind | None = None) -> "Dataset":
        """Copy with one existing column replaced (missing mask recomputed for it)."""
        schema = self.schema if kind is None else self.schema.replace_kind(name, kind)
        col = schema[name]
        if col.kind.is_numeric:
            arr = np.asarray(values, dtype=np.float64)
            miss = np.isnan(arr)
        else:
            arr = np.asarray(values, dtype=object)
            miss = arr == ""
        mask = self.missing.copy()
        mask[:, schema.index(name)] = miss
        cols = dict(self.columns)
        cols[name] = arr
        return Dataset(schema, cols, mask, self.row_ids)

    def labels(self) -> np.ndarray:
        """0/1 labels with not-on-time (``N``) as the positive class."""
        return (self.columns[self.schema.target] == "N").astype(np.int64)

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for line in _csv_lines(self):
            h.update(line.encode("utf-8"))
        return h.hexdigest()


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple[float, ...]
    seed: int = 0

    def __post_init__(self):
        fr = tuple(float(f) for f in self.fractions)
        object.__setattr__(self, "fractions", fr)
        if not fr or any(f <= 0 for f in fr):
            raise ValueError(f"split fractions must be positive, got {fr}")
        if abs(math.fsum(fr) - 1.0) > 1e-12:
            raise ValueError(f"split fractions must sum to 1, got {math.fsum(fr)!r}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class Violation:
    row: int
    column: str
    message: str

    def __str__(self):
        return f"row {self.row}, column {self.column}: {self.message}"


def _parse_cell(text: str, kind: FeatureKind, row: int, name: str):
    if kind.kind == NUMERIC:
        try:
            value = float(text)
        except ValueError:
            raise ParseError(f"row {row}, column {name}: cannot parse {text!r} as a number") from None
        if not math.isfinite(value):
            raise ParseError(f"row {row}, column {name}: non-finite value {text!r}")
        return value
    if kind.kind == INTEGER:
        try:
            return float(int(text))
        except ValueError:
            raise ParseError(f"row {row}, column {name}: cannot parse {text!r} as an integer") from None
    if kind.kind == CATEGORICAL and text not in kind.levels:
        raise ParseError(f"row {row}, column {name}: undeclared level {text!r}")
    return text


def load_csv(path, schema: Schema) -> Dataset:
    """Parse a CSV file into a :class:`Dataset`.

    Row numbers in error messages count data rows from 1 (the header is row 0).
    Empty cells and the literal ``NA`` are missing.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row expected") from None
        if len(header) != len(schema.columns) or set(header) != set(schema.names):
            missing = sorted(set(schema.names) - set(header))
            extra = sorted(set(header) - set(schema.names))
            raise SchemaError(f"{path}: header does not match schema "
                              f"(missing {missing}, unexpected {extra}, "
                              f"{len(header)} vs {len(schema.columns)} columns)")
        pos = [header.index(n) for n in schema.names]
        raw = [list() for _ in schema.columns]
        for r, rec in enumerate(reader, start=1):
            if len(rec) != len(header):
                raise ParseError(f"row {r}: expected {len(header)} fields, got {len(rec)}")
            for j, p in enumerate(pos):
                raw[j].append(rec[p])

    n = len(raw[0])
    mask = np.zeros((n, len(schema.columns)), dtype=bool)
    arrays = {}
    for j, col in enumerate(schema.columns):
        cells = raw[j]
        if col.kind.is_numeric:
            arr = np.full(n, np.nan)
        else:
            arr = np.full(n, "", dtype=object)
        for i, text in enumerate(cells):
            if text in MISSING_TOKENS:
                mask[i, j] = True
                continue
            arr[i] = _parse_cell(text, col.kind, i + 1, col.name)
        arrays[col.name] = arr
    ds = Dataset(schema, arrays, mask)
    problems = validate(ds)
    if problems:
        shown = "; ".join(f"row {v.row + 1}, column {v.column}: {v.message}" for v in problems[:5])
        more = f" (+{len(problems) - 5} more)" if len(problems) > 5 else ""
        raise ParseError(f"{path}: {shown}{more}")
    return ds


def _format_cell(value, kind: FeatureKind) -> str:
    if kind.kind == INTEGER:
        return str(int(value))
    if kind.kind == NUMERIC:
        return repr(float(value))
    return value


def _csv_lines(ds: Dataset):
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ds.schema.names)
    yield buf.getvalue()
    cols = [(ds.columns[c.name], c.kind) for c in ds.schema.columns]
    for i in range(ds.n_rows):
        buf.seek(0)
        buf.truncate()
        writer.writerow(["NA" if ds.missing[i, j] else _format_cell(arr[i], kind)
                         for j, (arr, kind) in enumerate(cols)])
        yield buf.getvalue()


def write_csv(ds: Dataset, path) -> None:
    """Write ``ds`` in the canonical CSV layout (missing cells as ``NA``)."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        for line in _csv_lines(ds):
            fh.write(line)


def validate(ds: Dataset) -> list[Violation]:
    """Every schema-invariant violation in ``ds``; empty when the table is valid."""
    out: list[Violation] = []
    n = ds.n_rows
    for j, col in enumerate(ds.schema.columns):
        arr = ds.columns[col.name]
        if len(arr) != n:
            out.append(Violation(-1, col.name, f"column length {len(arr)} != {n}"))
            continue
        present = ~ds.missing[:, j]
        kind = col.kind
        if kind.kind == CATEGORICAL:
            levels = set(kind.levels)
            for i in np.flatnonzero(present):
                if arr[i] not in levels:
                    out.append(Violation(int(i), col.name, f"undeclared level {arr[i]!r}"))
        elif kind.is_numeric:
            vals = np.asarray(arr, dtype=np.float64)
            for i in np.flatnonzero(present & ~np.isfinite(vals)):
                out.append(Violation(int(i), col.name, "non-finite value in observed cell"))
            ok = present & np.isfinite(vals)
            if kind.kind == INTEGER:
                for i in np.flatnonzero(ok & (vals != np.round(vals))):
                    out.append(Violation(int(i), col.name, f"non-integer value {vals[i]!r}"))
            if kind.bounds is not None:
                lo, hi = kind.bounds
                for i in np.flatnonzero(ok & ((vals < lo) | (vals > hi))):
                    out.append(Violation(int(i), col.name,
                                         f"value {vals[i]:g} outside [{lo:g}, {hi:g}]"))
    out.sort(key=lambda v: (v.row, ds.schema.index(v.column)))
    return out


def drop_missing(ds: Dataset, ignore: Iterable[str] = ()) -> Dataset:
    """Listwise deletion: keep rows with no missing cell (outside ``ignore``)."""
    ignore = set(ignore)
    cols = [j for j, name in enumerate(ds.schema.names) if name not in ignore]
    keep = ~ds.missing[:, cols].any(axis=1)
    return ds.take(np.flatnonzero(keep))


def _mode(values: np.ndarray) -> str:
    levels, counts = np.unique(values.astype(str), return_counts=True)
    # np.unique sorts, so argmax returns the lexicographically smallest tie
    return str(levels[np.argmax(counts)])


def impute_simple(train: Dataset, apply_to: Dataset, ignore: Iterable[str] = ()) -> Dataset:
    """Fill missing cells of ``apply_to`` with training means (numeric) or modes.

    Integer columns are rounded half-up and clamped to their bounds.
    """
    ignore = set(ignore)
    if train.schema.names != apply_to.schema.names:
        raise SchemaError("train and apply_to schemas differ")
    out = apply_to
    for j, col in enumerate(train.schema.columns):
        if col.name in ignore or not apply_to.missing[:, j].any():
            continue
        observed = ~train.missing[:, j]
        if not observed.any():
            raise ValueError(f"column {col.name!r} has no observed training values")
        train_vals = train.columns[col.name][observed]
        if col.kind.is_numeric:
            fill = float(np.mean(train_vals.astype(np.float64)))
            if col.kind.kind == INTEGER:
                fill = math.floor(fill + 0.5)
                if col.kind.bounds is not None:
                    fill = min(max(fill, col.kind.bounds[0]), col.kind.bounds[1])
            values = np.asarray(apply_to.columns[col.name], dtype=np.float64).copy()
        else:
            fill = _mode(train_vals)
            values = np.asarray(apply_to.columns[col.name], dtype=object).copy()
        values[apply_to.missing[:, j]] = fill
        out = out.with_column(col.name, values)
    return out


def split(ds: Dataset, spec: SplitSpec) -> list[Dataset]:
    """Seeded random partition of ``ds`` by ``spec.fractions``.

    Part sizes are ``floor(f * n)`` with the remainder added to the first
    part; rows inside each part keep their original relative order.
    """
    n = ds.n_rows
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    sizes = [int(math.floor(f * n + 1e-9)) for f in spec.fractions]
    sizes[0] += n - sum(sizes)
    perm = np.random.default_rng(spec.seed).permutation(n)
    parts, start = [], 0
    for size in sizes:
        parts.append(ds.take(np.sort(perm[start:start + size])))
        start += size
    return parts
