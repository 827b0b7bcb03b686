"""Features, schemas, datasets and the black-box model contract.

Models consume *encoded* batches: a float matrix of shape ``(n, M)`` where
numeric features carry their value and categorical features carry the index
of their symbol in the feature's category tuple. :class:`FeatureDomain`
converts between :class:`FeatureVector` objects and that encoding.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence, Union, runtime_checkable

import numpy as np


class XaiError(ValueError):
    """Base class for toolkit errors."""


class DataError(XaiError):
    pass


class ModelOutputError(XaiError):
    pass


class FeatureKind(enum.Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


Value = Union[float, str]


@dataclass(frozen=True)
class Feature:
    """Schema entry for one feature.

    Numeric features are bounded by ``[lower, upper)``; infinite bounds are
    allowed for explainers that never clamp (SHAP) but the counterfactual
    search requires finite ones.
    """

    name: str
    kind: FeatureKind = FeatureKind.NUMERIC
    lower: float = -math.inf
    upper: float = math.inf
    categories: tuple[str, ...] = ()
    mutable: bool = True

    def __post_init__(self):
        if self.kind is FeatureKind.NUMERIC:
            if math.isnan(self.lower) or math.isnan(self.upper) or not self.lower < self.upper:
                raise DataError(f"feature {self.name!r}: need lower < upper, got [{self.lower}, {self.upper})")
        else:
            if not self.categories:
                raise DataError(f"feature {self.name!r}: empty category set")
            if len(set(self.categories)) != len(self.categories):
                raise DataError(f"feature {self.name!r}: duplicate categories")

    @property
    def is_numeric(self) -> bool:
        return self.kind is FeatureKind.NUMERIC

    @classmethod
    def numeric(cls, name, lower=-math.inf, upper=math.inf, mutable=True) -> "Feature":
        return cls(name, FeatureKind.NUMERIC, float(lower), float(upper), (), mutable)

    @classmethod
    def categorical(cls, name, categories, mutable=True) -> "Feature":
        return cls(name, FeatureKind.CATEGORICAL, -math.inf, math.inf, tuple(str(c) for c in categories), mutable)

    def encode_value(self, value: Value) -> float:
        if self.is_numeric:
            if isinstance(value, str):
                raise DataError(f"feature {self.name!r}: expected a number, got {value!r}")
            v = float(value)
            if not math.isfinite(v):
                raise DataError(f"feature {self.name!r}: non-finite value {v}")
            return v
        try:
            return float(self.categories.index(str(value)))
        except ValueError:
            raise DataError(f"feature {self.name!r}: {value!r} not in domain {list(self.categories)}") from None

    def decode_value(self, code: float) -> Value:
        if self.is_numeric:
            return float(code)
        return self.categories[int(round(code))]

    @property
    def finite_bounds(self) -> bool:
        return self.is_numeric and math.isfinite(self.lower) and math.isfinite(self.upper)


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: tuple[Value, ...]

    def __post_init__(self):
        if len(self.names) == 0:
            raise DataError("a feature vector needs at least one feature")
        if len(self.names) != len(self.values):
            raise DataError("names and values differ in length")
        if len(set(self.names)) != len(self.names):
            raise DataError("feature names must be unique")
        for n, v in zip(self.names, self.values):
            if not isinstance(v, str) and not math.isfinite(float(v)):
                raise DataError(f"feature {n!r}: non-finite value {v}")

    def __len__(self):
        return len(self.values)

    def __getitem__(self, name: str) -> Value:
        return self.values[self.names.index(name)]

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.values))


@dataclass(frozen=True)
class OutputVector:
    names: tuple[str, ...]
    values: tuple[float, ...]
    confidences: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(self.names) != len(self.values):
            raise ModelOutputError("output names and values differ in length")
        if not all(math.isfinite(v) for v in self.values):
            raise ModelOutputError("non-finite model output")
        if self.confidences is not None:
            if len(self.confidences) != len(self.values):
                raise ModelOutputError("confidences and values differ in length")
            if not all(0.0 <= c <= 1.0 for c in self.confidences):
                raise ModelOutputError(f"confidence outside [0, 1]: {self.confidences}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class FeatureDomain:
    features: tuple[Feature, ...]

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise DataError("schema has no features")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")

    def __len__(self):
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    def __getitem__(self, i) -> Feature:
        return self.features[i]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @property
    def numeric_mask(self) -> np.ndarray:
        return np.array([f.is_numeric for f in self.features])

    @property
    def mutable_mask(self) -> np.ndarray:
        return np.array([f.mutable for f in self.features])

    @property
    def all_numeric(self) -> bool:
        return bool(self.numeric_mask.all())

    @property
    def lower(self) -> np.ndarray:
        return np.array([f.lower if f.is_numeric else 0.0 for f in self.features])

    @property
    def upper(self) -> np.ndarray:
        return np.array([f.upper if f.is_numeric else len(f.categories) - 1.0 for f in self.features])

    def ranges(self) -> np.ndarray:
        """Width of each numeric interval (1 for categoricals)."""
        return np.array([f.upper - f.lower if f.is_numeric else 1.0 for f in self.features])

    def midpoints(self) -> np.ndarray:
        mids = []
        for f in self.features:
            if not f.is_numeric:
                mids.append(0.0)
            elif not f.finite_bounds:
                raise DataError(f"feature {f.name!r} has no finite midpoint")
            else:
                mids.append(0.5 * (f.lower + f.upper))
        return np.array(mids)

    def encode(self, vector: FeatureVector | Sequence[Value]) -> np.ndarray:
        if isinstance(vector, FeatureVector):
            if vector.names != self.names:
                raise DataError(f"vector features {vector.names} do not match schema {self.names}")
            values = vector.values
        else:
            values = tuple(vector)
        if len(values) != len(self.features):
            raise DataError(f"expected {len(self.features)} values, got {len(values)}")
        return np.array([f.encode_value(v) for f, v in zip(self.features, values)])

    def encode_batch(self, batch: Iterable[FeatureVector | Sequence[Value]]) -> np.ndarray:
        rows = [self.encode(v) for v in batch]
        if not rows:
            return np.empty((0, len(self.features)))
        return np.vstack(rows)

    def decode(self, row: np.ndarray) -> FeatureVector:
        return FeatureVector(self.names, tuple(f.decode_value(v) for f, v in zip(self.features, row)))

    def clip(self, X: np.ndarray) -> np.ndarray:
        """Clamp numeric columns into their bounds (upper bound inclusive)."""
        X = np.array(X, dtype=float, copy=True)
        num = self.numeric_mask
        X[..., num] = np.clip(X[..., num], self.lower[num], self.upper[num])
        return X

    def contains(self, row: np.ndarray) -> bool:
        for f, v in zip(self.features, np.asarray(row)):
            if f.is_numeric:
                if not (f.lower <= v <= f.upper):
                    return False
            elif not (0 <= v < len(f.categories) and float(v).is_integer()):
                return False
        return True

    @classmethod
    def numeric(cls, names: Sequence[str], lower=None, upper=None, mutable=None) -> "FeatureDomain":
        m = len(names)
        lower = [-math.inf] * m if lower is None else lower
        upper = [math.inf] * m if upper is None else upper
        mutable = [True] * m if mutable is None else mutable
        return cls(tuple(Feature.numeric(n, lo, hi, mu) for n, lo, hi, mu in zip(names, lower, upper, mutable)))

    @classmethod
    def from_data(cls, names: Sequence[str], X: np.ndarray) -> "FeatureDomain":
        """Numeric schema whose bounds are the column min/max (inclusive)."""
        X = np.asarray(X, dtype=float)
        lo, hi = X.min(axis=0), X.max(axis=0)
        hi = np.where(hi > lo, hi, lo + 1.0)
        return cls.numeric(names, lo, hi)

    def to_dict(self) -> list[dict]:
        out = []
        for f in self.features:
            d = {"name": f.name, "kind": f.kind.value, "mutable": f.mutable}
            if f.is_numeric:
                d["lower"], d["upper"] = _json_float(f.lower), _json_float(f.upper)
            else:
                d["categories"] = list(f.categories)
            out.append(d)
        return out

    @classmethod
    def from_dict(cls, spec: Sequence[dict]) -> "FeatureDomain":
        feats = []
        for d in spec:
            kind = FeatureKind(d.get("kind", "numeric"))
            if kind is FeatureKind.NUMERIC:
                feats.append(Feature.numeric(d["name"], _parse_bound(d.get("lower"), -math.inf),
                                             _parse_bound(d.get("upper"), math.inf), d.get("mutable", True)))
            else:
                feats.append(Feature.categorical(d["name"], d["categories"], d.get("mutable", True)))
        return cls(tuple(feats))


def _json_float(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


def _parse_bound(v, default):
    if v is None:
        return default
    return float(v)


@dataclass(frozen=True)
class Dataset:
    """Rows held as an encoded float matrix plus the schema they conform to."""

    X: np.ndarray
    schema: FeatureDomain
    labels: np.ndarray | None = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if X.shape[0] == 0:
            raise DataError("no rows")
        if X.shape[1] != len(self.schema):
            raise DataError(f"rows have {X.shape[1]} columns, schema has {len(self.schema)}")
        if not np.isfinite(X).all():
            raise DataError("dataset contains non-finite values")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        if self.labels is not None:
            y = np.asarray(self.labels, dtype=float)
            y = y.reshape(len(y), -1)
            if len(y) != len(X):
                raise DataError("labels and rows differ in length")
            y.setflags(write=False)
            object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.X.shape[0]

    @property
    def rows(self) -> list[FeatureVector]:
        return [self.schema.decode(r) for r in self.X]

    def subset(self, idx) -> "Dataset":
        labels = None if self.labels is None else self.labels[idx]
        return Dataset(self.X[idx], self.schema, labels)


@runtime_checkable
class BlackBoxModel(Protocol):
    """Batch map from encoded feature rows to outputs.

    ``predict`` returns an ``(n, n_outputs)`` array. Models that know their
    confidence also implement ``confidence`` with the same shape; classifier
    models set ``is_classifier``. Implementations must be pure and thread safe.
    """

    n_outputs: int
    output_names: tuple[str, ...]

    def predict(self, X: np.ndarray) -> np.ndarray: ...


def has_confidence(model) -> bool:
    return callable(getattr(model, "confidence", None))


def is_classifier(model) -> bool:
    return bool(getattr(model, "is_classifier", False))


def predict_array(model, X: np.ndarray) -> np.ndarray:
    """``model.predict`` with shape and finiteness checks."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(model.predict(X), dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape != (X.shape[0], model.n_outputs):
        raise ModelOutputError(f"model returned shape {Y.shape}, expected {(X.shape[0], model.n_outputs)}")
    if not np.isfinite(Y).all():
        raise ModelOutputError("non-finite model output")
    return Y


def predict_checked(model, batch, schema: FeatureDomain | None = None) -> list[OutputVector]:
    """Predict a batch of feature vectors (or an encoded matrix) and validate the outputs."""
    if isinstance(batch, np.ndarray):
        X = np.atleast_2d(batch.astype(float))
    else:
        batch = list(batch)
        if not batch:
            raise DataError("empty batch")
        if schema is None:
            first = batch[0]
            if not isinstance(first, FeatureVector):
                X = np.asarray(batch, dtype=float)
            else:
                if any(isinstance(v, str) for v in first.values):
                    raise DataError("a schema is needed to encode categorical values")
                schema = FeatureDomain.numeric(first.names)
                X = schema.encode_batch(batch)
        else:
            X = schema.encode_batch(batch)
    if X.shape[0] == 0:
        raise DataError("empty batch")
    Y = predict_array(model, X)
    C = None
    if has_confidence(model):
        C = np.asarray(model.confidence(X), dtype=float).reshape(Y.shape)
    names = tuple(model.output_names)
    return [
        OutputVector(names, tuple(map(float, Y[i])), None if C is None else tuple(map(float, C[i])))
        for i in range(len(Y))
    ]


def ingest_csv(path, schema: FeatureDomain, has_header: bool = False, label_columns: int = 0) -> Dataset:
    """Read a CSV file into a :class:`Dataset`.

    ``label_columns`` trailing columns, if any, are read as numeric labels.
    Errors name the 1-based file row and column of the offending cell.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    m = len(schema)
    rows, labels = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, record in enumerate(reader, start=1):
            if has_header and lineno == 1:
                continue
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != m + label_columns:
                raise DataError(f"row {lineno}: expected {m + label_columns} columns, found {len(record)}")
            row = []
            for col, (feat, cell) in enumerate(zip(schema.features, record), start=1):
                cell = cell.strip()
                if feat.is_numeric:
                    v = _parse_real(cell, lineno, col)
                    row.append(v)
                else:
                    if cell not in feat.categories:
                        raise DataError(f"row {lineno}, column {col}: {cell!r} not in domain of {feat.name!r}")
                    row.append(float(feat.categories.index(cell)))
            rows.append(row)
            labels.append([_parse_real(c.strip(), lineno, m + j + 1) for j, c in enumerate(record[m:])])
    if not rows:
        raise DataError(f"no rows in {path}")
    y = np.asarray(labels, dtype=float) if label_columns else None
    return Dataset(np.asarray(rows, dtype=float), schema, y)


def _parse_real(cell: str, row: int, col: int) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DataError(f"row {row}, column {col}: cannot parse {cell!r} as a number") from None
    if not math.isfinite(v):
        raise DataError(f"row {row}, column {col}: non-finite value {cell!r}")
    return v


def read_csv_header(path) -> list[str]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return next(csv.reader(fh))


def write_csv(path, data: Dataset, header: bool = True) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(data.schema.names)
        for row in data.X:
            w.writerow([_format_cell(f, v) for f, v in zip(data.schema.features, row)])


def _format_cell(feat: Feature, v: float) -> str:
    if feat.is_numeric:
        return repr(float(v))
    return feat.categories[int(v)]


def mad_per_feature(data: Dataset | np.ndarray) -> np.ndarray:
    """Median absolute deviation per column; zero MADs are reported as 1."""
    if isinstance(data, Dataset):
        if not data.schema.all_numeric:
            bad = [f.name for f in data.schema if not f.is_numeric]
            raise DataError(f"MAD undefined for categorical features {bad}")
        X = data.X
    else:
        X = np.atleast_2d(np.asarray(data, dtype=float))
    if X.shape[0] == 0:
        raise DataError("no rows")
    mad = np.median(np.abs(X - np.median(X, axis=0)), axis=0)
    return np.where(mad == 0, 1.0, mad)
