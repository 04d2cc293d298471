"""Tabular credit-data ingestion and label-free preprocessing.

The two preprocessing steps are feature exclusion and percentile encoding of
numeric columns. Both operate on the feature columns only; label values live
in a separate array behind an audited accessor, so neither step can read them.
Balancing and metrics are the only consumers of labels.
"""
from __future__ import annotations

import bisect
import csv
import json
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Union

import yaml

from .exceptions import (
    ConfigurationError,
    ContractViolation,
    SamplingError,
    SchemaError,
    TableParseError,
)

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass
class PreprocessConfig:
    """Declares how a raw delimited file becomes rendered cases."""

    label_column: str
    label_mapping: dict[str, int]
    numeric_columns: list[str] = field(default_factory=list)
    excluded_features: list[str] = field(default_factory=list)
    seed: int = 0
    cases_per_class: Union[int, str] = "all"
    delimiter: str = ","

    def __post_init__(self):
        if self.cases_per_class != "all":
            if not isinstance(self.cases_per_class, int) or self.cases_per_class <= 0:
                raise ConfigurationError(
                    f"cases_per_class must be a positive integer or 'all', "
                    f"got {self.cases_per_class!r}"
                )
        bad = set(self.label_mapping.values()) - {0, 1}
        if bad:
            raise ConfigurationError(f"label_mapping must map onto {{0,1}}, got {sorted(bad)}")
        if self.label_column in self.numeric_columns:
            raise ConfigurationError("label column cannot be listed as a numeric feature")

    @classmethod
    def from_file(cls, path: str | Path) -> "PreprocessConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
        if not isinstance(raw, dict):
            raise ConfigurationError(f"{path}: expected a mapping at top level")
        known = {
            "label_column",
            "label_mapping",
            "numeric_columns",
            "excluded_features",
            "seed",
            "cases_per_class",
            "delimiter",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigurationError(f"{path}: unknown keys {sorted(unknown)}")
        if "label_column" not in raw or "label_mapping" not in raw:
            raise ConfigurationError(f"{path}: label_column and label_mapping are required")
        mapping = {str(k): int(v) for k, v in raw["label_mapping"].items()}
        return cls(
            label_column=raw["label_column"],
            label_mapping=mapping,
            numeric_columns=list(raw.get("numeric_columns", [])),
            excluded_features=list(raw.get("excluded_features", [])),
            seed=int(raw.get("seed", 0)),
            cases_per_class=raw.get("cases_per_class", "all"),
            delimiter=raw.get("delimiter", ","),
        )


@dataclass
class RawTable:
    """A parsed table whose feature rows carry no label values.

    ``rows`` holds feature columns only; mapped labels sit in ``_labels`` and
    are read through :meth:`labels`, which counts accesses so tests can assert
    that preprocessing never touches them.
    """

    columns: list[tuple[str, str]]  # (name, NUMERIC | CATEGORICAL), label excluded
    rows: list[dict[str, str]]
    label_column: str
    _labels: list[int] = field(default_factory=list, repr=False)
    label_reads: int = field(default=0, repr=False, compare=False)

    @property
    def column_names(self) -> list[str]:
        return [name for name, _ in self.columns]

    def labels(self) -> list[int]:
        """Audited label accessor; increments :attr:`label_reads`."""
        self.label_reads += 1
        return list(self._labels)

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class CaseRecord:
    """One customer profile ready for prompt rendering."""

    id: str
    attributes: tuple[tuple[str, str], ...]  # ordered (name, rendered value)
    label: int

    def attribute_dict(self) -> dict[str, str]:
        return dict(self.attributes)


def load_table(path: str | Path, schema: PreprocessConfig) -> RawTable:
    """Read a delimited file with a header row into a :class:`RawTable`.

    Label values are mapped through ``schema.label_mapping`` and stored apart
    from the feature rows. Numeric columns are validated cell by cell so a bad
    value fails with its row index instead of surfacing later.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty, expected a header row")
        header = [h.strip() for h in header]
        if schema.label_column not in header:
            raise SchemaError(f"{path}: label column {schema.label_column!r} not in header")
        missing = [c for c in schema.numeric_columns if c not in header]
        if missing:
            raise SchemaError(f"{path}: declared numeric columns missing from header: {missing}")

        label_pos = header.index(schema.label_column)
        feature_names = [h for h in header if h != schema.label_column]
        numeric = set(schema.numeric_columns)
        columns = [(name, NUMERIC if name in numeric else CATEGORICAL) for name in feature_names]

        rows: list[dict[str, str]] = []
        labels: list[int] = []
        for idx, values in enumerate(reader):
            if len(values) != len(header):
                raise TableParseError(
                    f"{path}: row {idx} has {len(values)} values, expected {len(header)}",
                    row=idx,
                )
            raw_label = values[label_pos].strip()
            if raw_label not in schema.label_mapping:
                raise TableParseError(
                    f"{path}: row {idx}: label value {raw_label!r} not covered by label_mapping",
                    row=idx,
                )
            row: dict[str, str] = {}
            for name, value in zip(header, values):
                if name == schema.label_column:
                    continue
                value = value.strip()
                if name in numeric:
                    try:
                        float(value)
                    except ValueError:
                        raise TableParseError(
                            f"{path}: row {idx}: column {name!r} expects a number, got {value!r}",
                            row=idx,
                        ) from None
                row[name] = value
            rows.append(row)
            labels.append(schema.label_mapping[raw_label])

    return RawTable(columns=columns, rows=rows, label_column=schema.label_column, _labels=labels)


def exclude_features(table: RawTable, names: Iterable[str]) -> RawTable:
    """Drop the named feature columns; row count and labels are untouched."""
    names = list(names)
    known = set(table.column_names)
    unknown = [n for n in names if n not in known]
    if any(n == table.label_column for n in names):
        raise ConfigurationError("the label column cannot be excluded")
    if unknown:
        raise ConfigurationError(f"cannot exclude unknown columns: {unknown}")
    drop = set(names)
    columns = [(n, k) for n, k in table.columns if n not in drop]
    rows = [{n: row[n] for n, _ in columns} for row in table.rows]
    return replace(table, columns=columns, rows=rows, label_reads=0)


def _ordinal(n: int) -> str:
    if 10 <= n % 100 <= 20:
        suffix = "th"
    else:
        suffix = {1: "st", 2: "nd", 3: "rd"}.get(n % 10, "th")
    return f"{n}{suffix}"


def percentile_text(p: int) -> str:
    return f"{_ordinal(p)} percentile"


def percentile_encode(table: RawTable) -> RawTable:
    """Replace each numeric value with its inclusive nearest-rank percentile.

    For value v in a column of N values, p = round(100 * |{u : u <= v}| / N),
    half away from zero, rendered as ordinal text such as "65th percentile".
    Within a column the encoding is monotone and tie-stable.
    """
    numeric_cols = [n for n, kind in table.columns if kind == NUMERIC]
    if not table.rows and numeric_cols:
        raise ConfigurationError("cannot percentile-encode an empty table")
    n_rows = len(table.rows)

    encoded: dict[str, list[str]] = {}
    for col in numeric_cols:
        values = [float(row[col]) for row in table.rows]
        ordered = sorted(values)
        texts = []
        for v in values:
            # bisect_right == count of u <= v in the sorted column
            count = bisect.bisect_right(ordered, v)
            p = int(math.floor(100.0 * count / n_rows + 0.5))
            texts.append(percentile_text(p))
        encoded[col] = texts

    rows = []
    for i, row in enumerate(table.rows):
        new_row = dict(row)
        for col in numeric_cols:
            new_row[col] = encoded[col][i]
        rows.append(new_row)
    return replace(table, rows=rows, label_reads=0)


def to_cases(table: RawTable, id_prefix: str = "case") -> list[CaseRecord]:
    """Attach labels back to rows, giving stable ids in table order."""
    labels = table.labels()
    width = max(4, len(str(len(table.rows))))
    cases = []
    for i, row in enumerate(table.rows):
        attributes = tuple((name, row[name]) for name, _ in table.columns)
        cases.append(CaseRecord(id=f"{id_prefix}-{i + 1:0{width}d}", attributes=attributes, label=labels[i]))
    return cases


def balance_sample(
    cases: list[CaseRecord], seed: int, per_class: Union[int, str] = "all"
) -> list[CaseRecord]:
    """Return a class-balanced, seed-deterministic sample.

    With per_class="all" every minority case is kept and an equally sized
    uniform sample of the majority class is drawn. With an integer k, exactly
    k cases per class are drawn (k must not exceed the minority count).
    Output order is a seeded shuffle.
    """
    by_label: dict[int, list[CaseRecord]] = {0: [], 1: []}
    for case in cases:
        by_label[case.label].append(case)
    if not by_label[0] or not by_label[1]:
        raise SamplingError("both classes must be present to balance-sample")

    minority = min(by_label.values(), key=len)
    rng = random.Random(seed)
    if per_class == "all":
        k = len(minority)
    else:
        k = int(per_class)
        if k > len(minority):
            raise SamplingError(
                f"per_class={k} exceeds the minority class count {len(minority)}"
            )

    picked: list[CaseRecord] = []
    for label in (0, 1):
        group = by_label[label]
        if per_class == "all" and group is minority:
            picked.extend(group)
        else:
            picked.extend(rng.sample(group, k))
    rng.shuffle(picked)
    return picked


def render_attributes(case: CaseRecord) -> str:
    """Serialize attributes as "name: value; name: value" in stored order."""
    if not case.attributes:
        raise ContractViolation(f"case {case.id} has no attributes")
    return "; ".join(f"{name}: {value}" for name, value in case.attributes)


def write_cases(cases: list[CaseRecord], path: str | Path) -> None:
    """Write one JSON object per line: {"id", "attributes", "label"}."""
    with open(path, "w", encoding="utf-8") as fh:
        for case in cases:
            fh.write(
                json.dumps(
                    {"id": case.id, "attributes": case.attribute_dict(), "label": case.label},
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_cases(path: str | Path) -> list[CaseRecord]:
    cases = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                attributes = tuple((k, str(v)) for k, v in obj["attributes"].items())
                cases.append(CaseRecord(id=obj["id"], attributes=attributes, label=int(obj["label"])))
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                raise TableParseError(f"{path}: line {line_no}: {exc}", row=line_no) from exc
    return cases
