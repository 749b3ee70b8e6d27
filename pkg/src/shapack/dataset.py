"""Tabular data ingestion, one-hot encoding and standardization.

Missing cells are NaN in ``Dataset.values``. Nominal columns keep their raw
strings in ``Dataset.nominal`` until :func:`one_hot_encode` expands them.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed tabular input."""


@dataclass(frozen=True)
class Schema:
    label: str | None = None
    nominal: tuple[str, ...] = ()
    max_cardinality: int = 64
    row_id: str | None = None

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Schema":
        return cls(
            label=doc.get("label"),
            nominal=tuple(doc.get("nominal", ())),
            max_cardinality=int(doc.get("max_cardinality", 64)),
            row_id=doc.get("row_id"),
        )

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "nominal": list(self.nominal),
            "max_cardinality": self.max_cardinality,
            "row_id": self.row_id,
        }


def load_schema(path) -> Schema:
    with open(path, encoding="utf-8") as fh:
        try:
            return Schema.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise DataError(f"malformed schema document: {exc}") from None


@dataclass(frozen=True, eq=False)
class Dataset:
    values: np.ndarray
    feature_names: tuple[str, ...]
    labels: np.ndarray | None = None
    nominal: Mapping[str, tuple] = field(default_factory=dict)
    row_ids: tuple = ()
    max_cardinality: int = 64

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError("values must be a 2-d matrix")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        n, k = values.shape
        if len(self.feature_names) != k:
            raise DataError(f"{len(self.feature_names)} names for {k} columns")
        if len(set(self.feature_names)) != k:
            raise DataError("feature names must be unique")
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=bool)
            if labels.shape != (n,):
                raise DataError(f"{labels.size} labels for {n} rows")
            object.__setattr__(self, "labels", labels)
        for name, col in self.nominal.items():
            if name not in self.feature_names:
                raise DataError(f"nominal column {name!r} is not a feature")
            if len(col) != n:
                raise DataError(f"nominal column {name!r} has {len(col)} rows, expected {n}")
        if not self.row_ids:
            object.__setattr__(self, "row_ids", tuple(range(n)))
        elif len(self.row_ids) != n:
            raise DataError(f"{len(self.row_ids)} row ids for {n} rows")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def nominal_columns(self) -> frozenset[str]:
        return frozenset(self.nominal)

    def index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise KeyError(f"unknown feature {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    def reorder(self, names: Sequence[str]) -> "Dataset":
        """Return the dataset with columns in ``names`` order.

        Raises ``KeyError`` listing the names that do not match exactly.
        """
        missing = [n for n in names if n not in self.feature_names]
        extra = [n for n in self.feature_names if n not in names]
        if missing or extra:
            raise KeyError(f"feature names do not match: missing {missing}, unexpected {extra}")
        idx = [self.feature_names.index(n) for n in names]
        return Dataset(
            values=self.values[:, idx],
            feature_names=tuple(names),
            labels=self.labels,
            nominal=dict(self.nominal),
            row_ids=self.row_ids,
            max_cardinality=self.max_cardinality,
        )


def _parse_cell(cell: str, row: int, col: str) -> float:
    if cell.strip() == "":
        return math.nan
    try:
        return float(cell)
    except ValueError:
        raise DataError(f"non-numeric cell row {row} col {col}") from None


def _parse_label(cell: str, row: int) -> bool:
    token = cell.strip().lower()
    if token in ("1", "1.0", "true"):
        return True
    if token in ("0", "0.0", "false"):
        return False
    raise DataError(f"invalid label {cell!r} at row {row}")


def load_csv(text: str, schema: Schema | None = None) -> Dataset:
    """Read a CSV document. Rows are numbered from 1 after the header."""
    schema = schema or Schema()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("missing header row") from None
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise DataError(f"duplicate header names: {dupes}")
    for col in (schema.label, schema.row_id, *schema.nominal):
        if col is not None and col not in header:
            raise DataError(f"schema column {col!r} not in header")

    feature_cols = [h for h in header if h not in (schema.label, schema.row_id)]
    values, labels, row_ids = [], [], []
    nominal = {name: [] for name in schema.nominal}
    for r, cells in enumerate(reader, start=1):
        if not cells:
            continue
        if len(cells) != len(header):
            raise DataError(f"ragged row {r}: {len(cells)} cells, expected {len(header)}")
        rec = dict(zip(header, cells))
        row = []
        for col in feature_cols:
            if col in nominal:
                cell = rec[col].strip()
                nominal[col].append(cell if cell else None)
                row.append(math.nan)
            else:
                row.append(_parse_cell(rec[col], r, col))
        values.append(row)
        if schema.label is not None:
            labels.append(_parse_label(rec[schema.label], r))
        if schema.row_id is not None:
            row_ids.append(rec[schema.row_id])

    matrix = np.array(values, dtype=float).reshape(len(values), len(feature_cols))
    return Dataset(
        values=matrix,
        feature_names=tuple(feature_cols),
        labels=np.array(labels, dtype=bool) if schema.label is not None else None,
        nominal={k: tuple(v) for k, v in nominal.items()},
        row_ids=tuple(row_ids),
        max_cardinality=schema.max_cardinality,
    )


def read_csv(path, schema: Schema | None = None) -> Dataset:
    with open(path, encoding="utf-8", newline="") as fh:
        return load_csv(fh.read(), schema)


def one_hot_encode(dataset: Dataset, max_cardinality: int | None = None) -> Dataset:
    """Expand each nominal column into one indicator column per observed value.

    Indicators are named ``"col=value"`` with values in sorted order and
    occupy the position of the original column. A missing nominal cell is
    missing in every indicator of that column.
    """
    if not dataset.nominal:
        raise DataError("dataset has no nominal columns to encode")
    limit = dataset.max_cardinality if max_cardinality is None else max_cardinality
    columns, names = [], []
    for j, name in enumerate(dataset.feature_names):
        if name not in dataset.nominal:
            columns.append(dataset.values[:, j])
            names.append(name)
            continue
        raw = dataset.nominal[name]
        levels = sorted({v for v in raw if v is not None})
        if len(levels) > limit:
            raise DataError(
                f"nominal column {name!r} has {len(levels)} distinct values (max {limit})"
            )
        missing = np.array([v is None for v in raw], dtype=bool)
        for level in levels:
            col = np.array([v == level for v in raw], dtype=float)
            col[missing] = math.nan
            columns.append(col)
            names.append(f"{name}={level}")
    n = dataset.n_rows
    matrix = np.column_stack(columns) if columns else np.empty((n, 0))
    return Dataset(
        values=matrix.reshape(n, len(names)),
        feature_names=tuple(names),
        labels=dataset.labels,
        row_ids=dataset.row_ids,
        max_cardinality=dataset.max_cardinality,
    )


@dataclass(frozen=True)
class StandardizationStats:
    feature_names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    @property
    def constant(self) -> np.ndarray:
        return self.std == 0

    @classmethod
    def from_dataset(cls, dataset: Dataset) -> "StandardizationStats":
        """Population mean and standard deviation, missing cells excluded."""
        if dataset.n_rows == 0:
            raise DataError("empty dataset")
        if dataset.nominal:
            raise DataError("unencoded nominal columns present")
        with np.errstate(invalid="ignore"):
            mean = np.nanmean(dataset.values, axis=0)
            std = np.sqrt(np.nanmean((dataset.values - mean) ** 2, axis=0))
            # rounding in the mean can leave a tiny spread on a constant column
            std[np.nanmax(dataset.values, axis=0) == np.nanmin(dataset.values, axis=0)] = 0.0
        return cls(dataset.feature_names, mean, std)


def standardize(dataset: Dataset) -> tuple[Dataset, StandardizationStats]:
    if dataset.n_rows == 0:
        raise DataError("empty dataset")
    if np.isnan(dataset.values).any():
        raise DataError("cannot standardize columns with missing values")
    stats = StandardizationStats.from_dataset(dataset)
    centered = dataset.values - stats.mean
    scale = np.where(stats.constant, 1.0, stats.std)
    out = centered / scale
    out[:, stats.constant] = 0.0
    return (
        Dataset(
            values=out,
            feature_names=dataset.feature_names,
            labels=dataset.labels,
            row_ids=dataset.row_ids,
            max_cardinality=dataset.max_cardinality,
        ),
        stats,
    )
