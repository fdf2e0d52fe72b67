"""Datasets, feature schemas and the stratified approximation/estimation split."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

TREATMENT_COLUMN = "treatment"
RESPONSE_COLUMN = "response"


class DataError(ValueError):
    """Raised when input data violates the dataset contract."""


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # "numeric" or "categorical"
    levels: tuple = ()

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"

    @property
    def cardinality(self) -> int:
        return len(self.levels)


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature columns.

    Categorical columns carry their level names; a level is stored in the
    feature matrix as its dense integer code ``0 .. cardinality - 1``.
    """

    columns: tuple

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError(f"duplicate column names in schema: {names}")
        for c in self.columns:
            if c.kind not in ("numeric", "categorical"):
                raise DataError(f"column {c.name!r}: unknown kind {c.kind!r}")
            if c.is_categorical and c.cardinality < 1:
                raise DataError(f"column {c.name!r}: categorical cardinality must be >= 1")
            if c.name in (TREATMENT_COLUMN, RESPONSE_COLUMN):
                raise DataError(f"column name {c.name!r} is reserved")

    @classmethod
    def from_pairs(cls, pairs) -> "FeatureSchema":
        """Build from ``(name, "numeric")`` or ``(name, ["A", "B", ...])`` pairs."""
        cols = []
        for name, kind in pairs:
            if kind == "numeric":
                cols.append(Column(name, "numeric"))
            else:
                cols.append(Column(name, "categorical", tuple(str(v) for v in kind)))
        return cls(tuple(cols))

    @property
    def d(self) -> int:
        return len(self.columns)

    @property
    def names(self) -> list:
        return [c.name for c in self.columns]

    @property
    def categorical_mask(self) -> np.ndarray:
        return np.array([c.is_categorical for c in self.columns], dtype=bool)

    def to_text(self) -> str:
        lines = []
        for c in self.columns:
            if c.is_categorical:
                lines.append(f"{c.name}=categorical:{','.join(c.levels)}")
            else:
                lines.append(f"{c.name}=numeric")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FeatureSchema":
        cols = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            name, sep, kind = line.partition("=")
            name, kind = name.strip(), kind.strip()
            if not sep or not name:
                raise DataError(f"schema line {lineno}: expected name=kind, got {raw!r}")
            if kind == "numeric":
                cols.append(Column(name, "numeric"))
            elif kind.startswith("categorical:"):
                levels = tuple(v.strip() for v in kind[len("categorical:"):].split(","))
                if any(not v for v in levels) or len(set(levels)) != len(levels):
                    raise DataError(f"schema line {lineno}: bad level list {kind!r}")
                cols.append(Column(name, "categorical", levels))
            else:
                raise DataError(f"schema line {lineno}: unknown kind {kind!r}")
        return cls(tuple(cols))

    def check_features(self, X: np.ndarray) -> np.ndarray:
        """Validate a coded feature matrix against the schema and return it as float64."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise DataError(f"expected {self.d} feature columns, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DataError("non-finite feature value")
        for j, c in enumerate(self.columns):
            if c.is_categorical:
                col = X[:, j]
                if np.any((col < 0) | (col >= c.cardinality) | (col != np.floor(col))):
                    raise DataError(f"column {c.name!r}: categorical code outside [0, {c.cardinality})")
        return X


@dataclass(frozen=True)
class Dataset:
    """Randomized-experiment sample: coded features, treatments ``1..K`` and responses."""

    schema: FeatureSchema
    features: np.ndarray
    treatments: np.ndarray
    responses: np.ndarray
    propensities: np.ndarray
    treatment_labels: tuple = field(default=())

    def __post_init__(self):
        X = self.schema.check_features(self.features)
        t = np.asarray(self.treatments)
        y = np.asarray(self.responses, dtype=np.float64)
        p = np.asarray(self.propensities, dtype=np.float64)
        n = X.shape[0]
        if n < 1:
            raise DataError("dataset is empty")
        if t.shape != (n,) or y.shape != (n,):
            raise DataError("features, treatments and responses must have the same length")
        if not np.all(np.isfinite(y)):
            raise DataError("non-finite response value")
        K = p.shape[0]
        if p.ndim != 1 or K < 1:
            raise DataError("propensities must be a non-empty vector")
        if np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-9:
            raise DataError(f"propensities must be positive and sum to 1, got {p.tolist()}")
        if not np.all(t == np.floor(t)) or t.min() < 1 or t.max() > K:
            raise DataError(f"treatment ids must lie in 1..{K}")
        labels = self.treatment_labels or tuple(str(k) for k in range(1, K + 1))
        if len(labels) != K:
            raise DataError("treatment_labels must have one entry per treatment")
        for name, arr in (("features", X), ("treatments", t.astype(np.int64)),
                          ("responses", y), ("propensities", p)):
            arr = np.array(arr, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "treatment_labels", tuple(labels))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def K(self) -> int:
        return self.propensities.shape[0]

    @property
    def d(self) -> int:
        return self.schema.d

    def treatment_counts(self) -> np.ndarray:
        return np.bincount(self.treatments - 1, minlength=self.K)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.schema, self.features[idx], self.treatments[idx],
                       self.responses[idx], self.propensities, self.treatment_labels)


@dataclass(frozen=True)
class DataSplit:
    approximation: np.ndarray
    estimation: np.ndarray


@dataclass
class RawTable:
    """String cells of a CSV file, keyed by header."""

    header: list
    rows: list
    comments: list = field(default_factory=list)

    def column(self, name: str) -> list:
        j = self.header.index(name)
        return [r[j] for r in self.rows]


def parse_csv(text: str) -> RawTable:
    """Parse CSV text; leading ``#`` lines are kept as comments."""
    lines = text.splitlines(keepends=True)
    comments = []
    while lines and lines[0].startswith("#"):
        comments.append(lines.pop(0).rstrip("\r\n"))
    reader = csv.reader(io.StringIO("".join(lines)))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("CSV has no header") from None
    if len(set(header)) != len(header):
        raise DataError(f"duplicate CSV columns: {header}")
    rows = []
    for lineno, row in enumerate(reader, 2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"CSV row {lineno}: expected {len(header)} cells, got {len(row)}")
        rows.append([c.strip() for c in row])
    return RawTable(header, rows, comments)


def read_csv(path: Union[str, Path]) -> RawTable:
    return parse_csv(Path(path).read_text())


def read_schema(path: Union[str, Path]) -> FeatureSchema:
    return FeatureSchema.from_text(Path(path).read_text())


def encode_features(raw: RawTable, schema: FeatureSchema) -> np.ndarray:
    """Convert the feature cells of ``raw`` into a coded float matrix."""
    missing = [c.name for c in schema.columns if c.name not in raw.header]
    if missing:
        raise DataError(f"CSV lacks schema columns {missing}")
    X = np.empty((len(raw.rows), schema.d), dtype=np.float64)
    for j, c in enumerate(schema.columns):
        cells = raw.column(c.name)
        if c.is_categorical:
            code = {v: i for i, v in enumerate(c.levels)}
            for i, v in enumerate(cells):
                if v not in code:
                    raise DataError(f"column {c.name!r}: unknown categorical level {v!r}")
                X[i, j] = code[v]
        else:
            for i, v in enumerate(cells):
                try:
                    x = float(v)
                except ValueError:
                    raise DataError(f"column {c.name!r}: not a number: {v!r}") from None
                if not math.isfinite(x):
                    raise DataError(f"column {c.name!r}: non-finite value {v!r}")
                X[i, j] = x
    return X


def _label_key(label: str):
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


def validate_dataset(raw: RawTable, schema: FeatureSchema,
                     propensities: Optional[Union[Sequence[float], Mapping[str, float]]] = None
                     ) -> Dataset:
    """Turn a parsed table into a :class:`Dataset`.

    ``propensities`` may be a sequence of K probabilities (treatment ids are then
    ``1..K``), a mapping from treatment label to probability, or ``None`` to use
    the empirical treatment frequencies. Treatment labels are re-encoded densely
    to ``1..K`` in the order the propensities list them (sorted labels when
    propensities are omitted or given as a mapping).
    """
    if not raw.rows:
        raise DataError("table has no rows")
    for col in (TREATMENT_COLUMN, RESPONSE_COLUMN):
        if col not in raw.header:
            raise DataError(f"CSV lacks required column {col!r}")
    X = encode_features(raw, schema)

    y = np.empty(len(raw.rows))
    for i, v in enumerate(raw.column(RESPONSE_COLUMN)):
        try:
            y[i] = float(v)
        except ValueError:
            raise DataError(f"response is not a number: {v!r}") from None
        if not math.isfinite(y[i]):
            raise DataError(f"non-finite response value {v!r} in row {i + 1}")

    t_raw = raw.column(TREATMENT_COLUMN)
    if propensities is None:
        labels = sorted(set(t_raw), key=_label_key)
        counts = {lab: 0 for lab in labels}
        for v in t_raw:
            counts[v] += 1
        probs = [counts[lab] / len(t_raw) for lab in labels]
    elif isinstance(propensities, Mapping):
        by_label = {str(k): float(v) for k, v in propensities.items()}
        labels = sorted(by_label, key=_label_key)
        probs = [by_label[k] for k in labels]
    else:
        probs = [float(p) for p in propensities]
        labels = [str(k) for k in range(1, len(probs) + 1)]

    index = {}
    for k, lab in enumerate(labels, 1):
        index[lab] = k
        # "1.0" and "1" name the same treatment
        try:
            as_float = float(lab)
            if as_float == int(as_float):
                index.setdefault(str(int(as_float)), k)
        except ValueError:
            pass
    t = np.empty(len(t_raw), dtype=np.int64)
    for i, v in enumerate(t_raw):
        k = index.get(v)
        if k is None:
            try:
                f = float(v)
                k = index.get(str(int(f))) if f == int(f) else None
            except ValueError:
                k = None
        if k is None:
            raise DataError(f"unknown treatment id {v!r}; known: {list(labels)}")
        t[i] = k
    return Dataset(schema, X, t, y, np.asarray(probs), tuple(labels))


def approximation_counts(counts: np.ndarray, rho: float) -> np.ndarray:
    """Per-treatment size of the approximation set, ``round(rho * n_t)``.

    Clamped to ``[1, n_t - 1]`` so both halves see every treatment.
    """
    rho_d = Decimal(repr(float(rho)))
    out = np.empty(len(counts), dtype=np.int64)
    for k, n_t in enumerate(counts):
        a = int((rho_d * int(n_t)).quantize(Decimal(1), rounding=ROUND_HALF_UP))
        out[k] = min(max(a, 1), int(n_t) - 1)
    return out


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def stratified_split(data: Dataset, rho: float, seed) -> DataSplit:
    """Draw ``round(rho * n_t)`` samples of each treatment into the approximation set."""
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    counts = data.treatment_counts()
    if np.any(counts < 2):
        raise DataError(f"every treatment needs >= 2 samples to split, counts={counts.tolist()}")
    rng = as_generator(seed)
    sizes = approximation_counts(counts, rho)
    approx, estim = [], []
    for k in range(data.K):
        members = np.flatnonzero(data.treatments == k + 1)
        chosen = np.zeros(members.size, dtype=bool)
        chosen[rng.choice(members.size, size=sizes[k], replace=False)] = True
        approx.append(members[chosen])
        estim.append(members[~chosen])
    return DataSplit(np.sort(np.concatenate(approx)), np.sort(np.concatenate(estim)))
