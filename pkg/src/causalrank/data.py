"""Tabular ingestion: CSV + schema sidecar, median imputation, standardization.

A :class:`Dataset` holds the encoded predictor matrix (categoricals already
expanded to indicator columns) plus the binary target vector. Missing
predictor cells are carried as NaN until :func:`impute_median` fills them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateColumnError,
    ParseError,
    SchemaError,
    UnimputableError,
    ValidationError,
)

KINDS = ("continuous", "binary", "categorical", "target")
MISSING = {"", "NA"}
LIKELIHOOD_COLUMN = "OUTCOME_LIKELIHOOD"


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")


def validate_schema(schema: Sequence[ColumnSchema]) -> None:
    names = [c.name for c in schema]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise SchemaError(f"duplicate column names: {dupes}")
    n_target = sum(c.kind == "target" for c in schema)
    if n_target != 1:
        raise SchemaError(f"schema needs exactly one target column, found {n_target}")


def load_schema(path) -> list[ColumnSchema]:
    """Read a ``name,kind`` sidecar, one column per line."""
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"schema file not found: {path}")
    schema = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 'name,kind', got {row!r}", reader.line_num)
            name, kind = (s.strip() for s in row)
            if (name, kind) == ("name", "kind"):
                continue
            schema.append(ColumnSchema(name, kind))
    validate_schema(schema)
    return schema


def write_schema(schema: Iterable[ColumnSchema], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for col in schema:
            writer.writerow([col.name, col.kind])


@dataclass(frozen=True)
class Dataset:
    """Encoded predictors ``values`` (B x N) and binary ``target`` (B,).

    ``columns``/``kinds`` describe the encoded predictor columns; ``groups``
    maps each categorical source column to the indices of its indicators.
    """

    schema: tuple[ColumnSchema, ...]
    columns: tuple[str, ...]
    kinds: tuple[str, ...]
    values: np.ndarray
    target: np.ndarray
    target_name: str
    groups: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        target = np.array(self.target, dtype=np.int64)
        if values.ndim != 2 or values.shape[1] != len(self.columns):
            raise ValidationError(
                f"values shape {values.shape} inconsistent with {len(self.columns)} columns"
            )
        if len(self.kinds) != len(self.columns):
            raise ValidationError("kinds and columns differ in length")
        if target.shape != (values.shape[0],):
            raise ValidationError("target length does not match row count")
        if not np.isin(target, (0, 1)).all():
            raise ValidationError("target entries must be 0 or 1")
        values.flags.writeable = False
        target.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "kinds", tuple(self.kinds))

    @property
    def row_count(self) -> int:
        return self.values.shape[0]

    @property
    def var_count(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def replace(self, **changes) -> "Dataset":
        fields = dict(
            schema=self.schema,
            columns=self.columns,
            kinds=self.kinds,
            values=self.values,
            target=self.target,
            target_name=self.target_name,
            groups=self.groups,
        )
        fields.update(changes)
        return Dataset(**fields)

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return self.replace(values=self.values[rows], target=self.target[rows])

    def encoded_schema(self) -> list[ColumnSchema]:
        """Schema describing the encoded columns (indicators become binary)."""
        cols = [ColumnSchema(n, k) for n, k in zip(self.columns, self.kinds)]
        return cols + [ColumnSchema(self.target_name, "target")]


def _parse_float(text, column, line):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"column {column!r}: cannot parse {text!r} as a number", line) from None
    if not math.isfinite(value):
        raise ParseError(f"column {column!r}: non-finite value {text!r}", line)
    return value


def load_csv(path, schema: Sequence[ColumnSchema]) -> Dataset:
    """Parse a header-first CSV against ``schema``.

    Empty fields and ``NA`` are missing. Rows with a missing target are
    dropped; categorical columns are one-hot expanded over their sorted
    observed levels.
    """
    validate_schema(schema)
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"input file not found: {path}")
    by_name = {c.name: c for c in schema}

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, strict=True)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", 1) from None
        except csv.Error as exc:
            raise ParseError(str(exc), reader.line_num) from None
        header = [h.strip() for h in header]
        unknown = [h for h in header if h not in by_name]
        if unknown:
            raise SchemaError(f"columns not in schema: {unknown}")
        absent = [c.name for c in schema if c.name not in header]
        if absent:
            raise SchemaError(f"schema columns missing from header: {absent}")
        if len(set(header)) != len(header):
            raise SchemaError("duplicate header names")

        raw: list[list[str]] = []
        lines: list[int] = []
        try:
            for row in reader:
                if not row:
                    continue
                if len(row) != len(header):
                    raise ParseError(
                        f"expected {len(header)} fields, got {len(row)}", reader.line_num
                    )
                raw.append([cell.strip() for cell in row])
                lines.append(reader.line_num)
        except csv.Error as exc:
            raise ParseError(str(exc), reader.line_num) from None

    target_col = next(c for c in schema if c.kind == "target")
    t_idx = header.index(target_col.name)
    target, keep = [], []
    for r, (row, line) in enumerate(zip(raw, lines)):
        cell = row[t_idx]
        if cell in MISSING:
            continue
        value = _parse_float(cell, target_col.name, line)
        if value not in (0.0, 1.0):
            raise ValidationError(f"line {line}: target {target_col.name!r} has non-binary value {cell!r}")
        target.append(int(value))
        keep.append(r)

    columns, kinds, blocks, groups = [], [], [], {}
    for h_idx, name in enumerate(header):
        kind = by_name[name].kind
        if kind == "target":
            continue
        cells = [raw[r][h_idx] for r in keep]
        cell_lines = [lines[r] for r in keep]
        if kind == "categorical":
            levels = sorted({c for c in cells if c not in MISSING})
            block = np.full((len(cells), len(levels)), np.nan)
            for i, c in enumerate(cells):
                if c not in MISSING:
                    block[i] = 0.0
                    block[i, levels.index(c)] = 1.0
            groups[name] = tuple(range(len(columns), len(columns) + len(levels)))
            columns.extend(f"{name}={lv}" for lv in levels)
            kinds.extend(["binary"] * len(levels))
            blocks.append(block)
            continue
        col = np.empty(len(cells))
        for i, (c, line) in enumerate(zip(cells, cell_lines)):
            if c in MISSING:
                col[i] = np.nan
                continue
            col[i] = _parse_float(c, name, line)
            if kind == "binary" and col[i] not in (0.0, 1.0):
                raise ValidationError(f"line {line}: binary column {name!r} has value {c!r}")
        columns.append(name)
        kinds.append(kind)
        blocks.append(col[:, None])

    values = np.hstack(blocks) if blocks else np.empty((len(keep), 0))
    return Dataset(
        schema=tuple(schema),
        columns=tuple(columns),
        kinds=tuple(kinds),
        values=values,
        target=np.asarray(target, dtype=np.int64),
        target_name=target_col.name,
        groups=groups,
    )


def write_csv(ds: Dataset, path) -> None:
    """Write encoded columns then the target; floats use shortest round-trip repr."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(ds.columns) + [ds.target_name])
        for row, t in zip(ds.values, ds.target):
            writer.writerow(["NA" if np.isnan(v) else repr(float(v)) for v in row] + [int(t)])


def impute_median(ds: Dataset) -> Dataset:
    """Fill missing cells with the column median of the observed entries.

    Indicator columns of a categorical source are imputed jointly with the
    most frequent level so every row keeps exactly one active indicator.
    """
    values = np.array(ds.values)
    if not np.isnan(values).any():
        return ds
    grouped = set()
    for source, idx in ds.groups.items():
        idx = list(idx)
        grouped.update(idx)
        block = values[:, idx]
        missing = np.isnan(block).any(axis=1)
        if not missing.any():
            continue
        if missing.all():
            raise UnimputableError(source)
        counts = np.nansum(block[~missing], axis=0)
        fill = np.zeros(len(idx))
        fill[int(np.argmax(counts))] = 1.0
        block[missing] = fill
        values[:, idx] = block
    for j, name in enumerate(ds.columns):
        if j in grouped:
            continue
        col = values[:, j]
        missing = np.isnan(col)
        if not missing.any():
            continue
        if missing.all():
            raise UnimputableError(name)
        col[missing] = np.median(col[~missing])
    return ds.replace(values=values)


@dataclass(frozen=True)
class Standardization:
    columns: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray

    def inverse(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values) * self.std + self.mean


def standardize(ds: Dataset) -> tuple[Dataset, Standardization]:
    """Zero mean, unit population std for every predictor column."""
    if np.isnan(ds.values).any():
        raise ValidationError("dataset still has missing cells; impute before standardizing")
    mean = ds.values.mean(axis=0)
    std = ds.values.std(axis=0)
    for name, s in zip(ds.columns, std):
        if not s > 0:
            raise DegenerateColumnError(name)
    out = (ds.values - mean) / std
    return ds.replace(values=out), Standardization(ds.columns, mean, std)
