"""Tabular ingestion, equi-width discretization and item encoding.

An *item* is a single-attribute condition: ``A = a`` for a categorical
attribute, or ``lo <= A < hi`` for one bin of a numerical attribute. Every
item in the universe gets a dense integer id, assigned attribute by
attribute, so an itemized instance is just a row of ``n_attributes`` ids.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, UsageError

CATEGORICAL = "categorical"
NUMERICAL = "numerical"
LABEL = "label"
DROP = "drop"

NORMAL = "normal"
ANOMALY = "anomaly"

UNKNOWN = "<unknown>"
DEFAULT_BINS = 10
SCHEMA_VERSION = 1

# NSL-KDD: 41 features, protocol_type/service/flag are the symbolic ones.
NSL_KDD_FEATURES = (
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins",
    "logged_in", "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files",
    "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate",
    "srv_rerror_rate", "same_srv_rate", "diff_srv_rate",
    "srv_diff_host_rate", "dst_host_count", "dst_host_srv_count",
    "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate", "dst_host_srv_serror_rate",
    "dst_host_rerror_rate", "dst_host_srv_rerror_rate",
)
NSL_KDD_CATEGORICAL = frozenset({"protocol_type", "service", "flag"})


@dataclass
class Attribute:
    """One feature column.

    For categorical attributes ``values`` is the observed dictionary (sorted);
    its items are followed by one reserved ``<unknown>`` item. For numerical
    attributes ``lo``/``hi`` hold the observed range and ``edges`` the
    ``bins + 1`` fitted boundaries once the discretizer has run.
    """

    name: str
    kind: str
    values: list[str] = field(default_factory=list)
    bins: int = 0
    lo: float | None = None
    hi: float | None = None
    edges: list[float] = field(default_factory=list)
    offset: int = 0

    @property
    def n_items(self) -> int:
        if self.kind == CATEGORICAL:
            return len(self.values) + 1
        return len(self.edges) - 1

    @property
    def width(self) -> float | None:
        if self.kind != NUMERICAL or not self.edges:
            return None
        return (self.edges[-1] - self.edges[0]) / (len(self.edges) - 1)

    def item_for(self, value: str | float) -> int:
        if self.kind == CATEGORICAL:
            try:
                return self.offset + self._index[value]
            except KeyError:
                return self.offset + len(self.values)
        inner = np.asarray(self.edges[1:-1])
        return self.offset + int(np.searchsorted(inner, float(value), side="right"))

    def describe(self, item: int) -> str:
        local = item - self.offset
        if self.kind == CATEGORICAL:
            value = self.values[local] if local < len(self.values) else UNKNOWN
            return f"{self.name} = {value}"
        lo, hi = self.edges[local], self.edges[local + 1]
        if local == self.n_items - 1:
            return f"{lo:g} <= {self.name} <= {hi:g}"
        return f"{lo:g} <= {self.name} < {hi:g}"

    def _reindex(self) -> None:
        self._index = {v: i for i, v in enumerate(self.values)}

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        if self.kind == CATEGORICAL:
            out["values"] = list(self.values)
        else:
            out.update(bins=self.bins, lo=self.lo, hi=self.hi, edges=list(self.edges))
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Attribute":
        attr = cls(
            name=d["name"],
            kind=d["kind"],
            values=list(d.get("values", [])),
            bins=d.get("bins", 0),
            lo=d.get("lo"),
            hi=d.get("hi"),
            edges=list(d.get("edges", [])),
        )
        attr._reindex()
        return attr

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Attribute):
            return NotImplemented
        return self.to_dict() == other.to_dict() and self.offset == other.offset


@dataclass
class AttributeSchema:
    """Ordered attributes plus the column layout of the raw file."""

    attributes: list[Attribute]
    columns: list[str]
    label_column: int | None = None

    def __post_init__(self) -> None:
        for a in self.attributes:
            a._reindex()
        self._assign_offsets()

    def _assign_offsets(self) -> None:
        offset = 0
        for a in self.attributes:
            a.offset = offset
            offset += a.n_items if self.fitted else (len(a.values) + 1 if a.kind == CATEGORICAL else 0)

    @property
    def fitted(self) -> bool:
        return all(a.kind == CATEGORICAL or a.edges for a in self.attributes)

    @property
    def n_attributes(self) -> int:
        return len(self.attributes)

    @property
    def n_items(self) -> int:
        self._require_fitted()
        return sum(a.n_items for a in self.attributes)

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    def _require_fitted(self) -> None:
        if not self.fitted:
            raise UsageError("discretizer has not been fitted on this schema")

    def attribute_of(self, item: int) -> Attribute:
        self._require_fitted()
        for a in self.attributes:
            if a.offset <= item < a.offset + a.n_items:
                return a
        raise UsageError(f"item id {item} is outside the item universe")

    def describe_item(self, item: int) -> str:
        return self.attribute_of(item).describe(item)

    def to_dict(self) -> dict:
        return {
            "version": SCHEMA_VERSION,
            "columns": list(self.columns),
            "label_column": self.label_column,
            "attributes": [a.to_dict() for a in self.attributes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AttributeSchema":
        if d.get("version") != SCHEMA_VERSION:
            raise DataError(f"unsupported schema version {d.get('version')!r}")
        return cls(
            attributes=[Attribute.from_dict(a) for a in d["attributes"]],
            columns=list(d["columns"]),
            label_column=d["label_column"],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "AttributeSchema":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except OSError as exc:
            raise DataError(f"cannot read schema file {path}: {exc}") from exc

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AttributeSchema):
            return NotImplemented
        return self.to_dict() == other.to_dict()


@dataclass(frozen=True)
class Instance:
    values: tuple
    label: str | None = None
    row: int | None = None


@dataclass(frozen=True)
class ItemizedInstance:
    """One item id per attribute, in attribute order."""

    items: tuple[int, ...]

    @property
    def item_set(self) -> frozenset[int]:
        return frozenset(self.items)

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class Pattern:
    items: frozenset[int]

    @property
    def length(self) -> int:
        return len(self.items)

    def render(self, schema: AttributeSchema | None = None) -> str:
        parts = sorted(self.items)
        if schema is None:
            return "{" + ", ".join(map(str, parts)) + "}"
        return " AND ".join(schema.describe_item(i) for i in parts)


@dataclass
class ItemizedDataset:
    """A dense ``(n, n_attributes)`` matrix of item ids with optional labels."""

    matrix: np.ndarray
    labels: list[str | None]

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def __getitem__(self, i: int) -> ItemizedInstance:
        return ItemizedInstance(tuple(int(v) for v in self.matrix[i]))

    @property
    def labelled(self) -> bool:
        return any(lab is not None for lab in self.labels)


# ---------------------------------------------------------------------------
# schema construction and discretization


def build_schema(
    raw_table: Sequence[Sequence[str]],
    kind_hints: Sequence[str],
    names: Sequence[str] | None = None,
) -> AttributeSchema:
    """Register categorical dictionaries and numerical ranges.

    ``kind_hints`` has one entry per column: ``categorical``, ``numerical``,
    ``label`` or ``drop``. At most one column may be the label.
    """
    ncol = len(kind_hints)
    if sum(k == LABEL for k in kind_hints) > 1:
        raise UsageError("at most one column may be designated as the label")
    bad = set(kind_hints) - {CATEGORICAL, NUMERICAL, LABEL, DROP}
    if bad:
        raise UsageError(f"unknown column kinds: {sorted(bad)}")
    names = list(names) if names is not None else [f"a{j}" for j in range(ncol)]
    if len(names) != ncol:
        raise UsageError("names and kind_hints differ in length")
    for i, row in enumerate(raw_table):
        if len(row) != ncol:
            raise DataError(f"row {i}: expected {ncol} cells, got {len(row)}")

    attributes = []
    for j, kind in enumerate(kind_hints):
        if kind == CATEGORICAL:
            values = sorted({row[j] for row in raw_table})
            attributes.append(Attribute(names[j], CATEGORICAL, values=values))
        elif kind == NUMERICAL:
            col = [_parse_float(row[j], i, j) for i, row in enumerate(raw_table)]
            lo, hi = (min(col), max(col)) if col else (None, None)
            attributes.append(Attribute(names[j], NUMERICAL, lo=lo, hi=hi))
    label_col = kind_hints.index(LABEL) if LABEL in kind_hints else None
    return AttributeSchema(attributes, columns=list(kind_hints), label_column=label_col)


def fit_discretizer(
    schema: AttributeSchema, data: Sequence[Instance], bins: int = DEFAULT_BINS
) -> AttributeSchema:
    """Fit ``bins`` equal-width intervals per numerical attribute, in place.

    The last interval is closed at the observed maximum. A constant column
    gets a single bin.
    """
    if bins < 1:
        raise UsageError("bins must be a positive integer")
    if not data:
        raise DataError("cannot fit a discretizer on empty data")
    for j, attr in enumerate(schema.attributes):
        if attr.kind != NUMERICAL:
            continue
        col = [float(x.values[j]) for x in data]
        lo, hi = min(col), max(col)
        attr.lo, attr.hi = lo, hi
        if lo == hi:
            attr.bins, attr.edges = 1, [lo, hi]
        else:
            attr.bins = bins
            attr.edges = _equal_width_edges(lo, hi, bins)
    schema._assign_offsets()
    return schema


def _equal_width_edges(lo: float, hi: float, bins: int) -> list[float]:
    edges = np.linspace(lo, hi, bins + 1)
    edges[0], edges[-1] = lo, hi
    return [float(e) for e in edges]


def itemize(x: Instance, schema: AttributeSchema) -> ItemizedInstance:
    schema._require_fitted()
    if len(x.values) != schema.n_attributes:
        raise DataError(
            f"instance has {len(x.values)} values, schema has {schema.n_attributes} attributes"
        )
    return ItemizedInstance(tuple(a.item_for(v) for a, v in zip(schema.attributes, x.values)))


def itemize_all(instances: Sequence[Instance], schema: AttributeSchema) -> ItemizedDataset:
    """Vectorized :func:`itemize` over many instances."""
    schema._require_fitted()
    n, na = len(instances), schema.n_attributes
    matrix = np.empty((n, na), dtype=np.int32)
    for j, attr in enumerate(schema.attributes):
        col = [x.values[j] for x in instances]
        if attr.kind == CATEGORICAL:
            unknown = len(attr.values)
            matrix[:, j] = [attr.offset + attr._index.get(v, unknown) for v in col]
        else:
            inner = np.asarray(attr.edges[1:-1])
            vals = np.asarray(col, dtype=float)
            matrix[:, j] = attr.offset + np.searchsorted(inner, vals, side="right")
    return ItemizedDataset(matrix, [x.label for x in instances])


# ---------------------------------------------------------------------------
# pattern arithmetic


def _items(x) -> frozenset:
    if isinstance(x, (ItemizedInstance, Pattern)):
        return x.item_set if isinstance(x, ItemizedInstance) else x.items
    return frozenset(x)


def matches(x, pattern) -> bool:
    """True iff every item of ``pattern`` is present in ``x``."""
    return _items(pattern) <= _items(x)


def support(pattern, data: Sequence) -> Fraction:
    if len(data) == 0:
        raise UsageError("support is undefined on an empty dataset")
    p = _items(pattern)
    return Fraction(sum(p <= _items(x) for x in data), len(data))


def growth_rate(pattern, home: Sequence, opposing: Sequence) -> float:
    """Support ratio home/opposing; 0 when both are zero, ``inf`` when only
    the opposing support is zero."""
    s_home = support(pattern, home)
    s_opp = support(pattern, opposing)
    if s_opp == 0:
        return math.inf if s_home > 0 else 0.0
    return float(s_home / s_opp)


# ---------------------------------------------------------------------------
# file ingestion


def read_rows(path: str | Path) -> list[list[str]]:
    try:
        with open(path, newline="") as fh:
            rows = [[c.strip() for c in row] for row in csv.reader(fh) if row]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return rows


def infer_layout(rows: Sequence[Sequence[str]], label_col: str | int | None = "auto"):
    """Guess column kinds and names for a headerless table.

    Rows with 41/42/43 cells are treated as NSL-KDD (features, label,
    difficulty). Otherwise every fully numeric column is numerical, the rest
    categorical; ``label_col`` picks the label column (``auto`` means the
    last one, ``None`` means the file is unlabelled).
    """
    if not rows:
        raise DataError("table is empty")
    ncol = len(rows[0])
    if label_col == "auto" and ncol in (41, 42, 43):
        kinds = [CATEGORICAL if n in NSL_KDD_CATEGORICAL else NUMERICAL for n in NSL_KDD_FEATURES]
        names = list(NSL_KDD_FEATURES)
        if ncol >= 42:
            kinds.append(LABEL)
            names.append("class")
        if ncol == 43:
            kinds.append(DROP)
            names.append("difficulty")
        return kinds, names

    if label_col == "auto":
        label_col = ncol - 1
    if label_col is not None:
        label_col = int(label_col) % ncol
    kinds = []
    for j in range(ncol):
        if j == label_col:
            kinds.append(LABEL)
        elif all(_is_float(row[j]) for row in rows if j < len(row)):
            kinds.append(NUMERICAL)
        else:
            kinds.append(CATEGORICAL)
    return kinds, [f"a{j}" for j in range(ncol)]


def parse_label(raw: str) -> str:
    return NORMAL if raw.strip().rstrip(".").lower() == NORMAL else ANOMALY


def to_instances(rows: Sequence[Sequence[str]], columns: Sequence[str]) -> list[Instance]:
    """Split raw rows into feature values and labels under a column layout."""
    ncol = len(columns)
    out = []
    for i, row in enumerate(rows):
        if len(row) != ncol:
            raise DataError(f"row {i}: expected {ncol} cells, got {len(row)}")
        values, label = [], None
        for j, (kind, cell) in enumerate(zip(columns, row)):
            if kind == NUMERICAL:
                values.append(_parse_float(cell, i, j))
            elif kind == CATEGORICAL:
                values.append(cell)
            elif kind == LABEL:
                label = parse_label(cell)
        out.append(Instance(tuple(values), label, i))
    return out


@dataclass
class Table:
    """A parsed headerless file: raw cells, column layout and instances."""

    rows: list[list[str]]
    kinds: list[str]
    names: list[str]
    instances: list[Instance]

    def __len__(self) -> int:
        return len(self.instances)

    @property
    def labelled(self) -> bool:
        return self.kinds.count(LABEL) == 1

    def normal_only(self) -> "Table":
        keep = [i for i, x in enumerate(self.instances) if x.label in (None, NORMAL)]
        return Table(
            [self.rows[i] for i in keep], self.kinds, self.names,
            [self.instances[i] for i in keep],
        )


def load_table(path, label_col: str | int | None = "auto", layout=None) -> Table:
    """Read a headerless CSV. ``layout`` (kinds, names) forces the column
    layout, e.g. the one recorded in a trained schema."""
    rows = read_rows(path)
    if not rows:
        raise DataError(f"{path}: no rows")
    kinds, names = layout if layout is not None else infer_layout(rows, label_col)
    names = list(names) if names is not None else [f"a{j}" for j in range(len(kinds))]
    return Table(rows, list(kinds), names, to_instances(rows, kinds))


def fit_schema(table: Table, bins: int = DEFAULT_BINS) -> AttributeSchema:
    """Schema over ``table`` with the discretizer fitted on its instances."""
    schema = build_schema(table.rows, table.kinds, table.names)
    return fit_discretizer(schema, table.instances, bins)


def _is_float(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _parse_float(cell: str, row: int, col: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise DataError(f"row {row}, column {col}: cannot parse {cell!r} as a number") from None
