"""Dataset container, label codings and CSV I/O."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed input data; the message names the offending cell."""


class LabelCoding(enum.Enum):
    PLUS_MINUS_ONE = "pm1"
    ZERO_ONE = "01"


def to_pm1(y) -> np.ndarray:
    """Map {0,1} (or already {-1,+1}) labels to {-1,+1}. Idempotent."""
    y = np.asarray(y, dtype=float)
    vals = set(np.unique(y).tolist())
    if vals <= {-1.0, 1.0}:
        return y.astype(np.int8)
    if vals <= {0.0, 1.0}:
        return (2 * y - 1).astype(np.int8)
    raise DataError(f"labels must be binary in {{0,1}} or {{-1,1}}, got {sorted(vals)[:5]}")


def to_01(y) -> np.ndarray:
    """Map {-1,+1} labels to {0,1} via (y+1)/2."""
    y = np.asarray(y)
    vals = set(np.unique(y).tolist())
    if vals <= {0, 1} and not (vals & {-1}):
        return y.astype(np.int8)
    if not vals <= {-1, 1}:
        raise DataError(f"labels must be in {{-1,1}}, got {sorted(vals)[:5]}")
    return ((y + 1) // 2).astype(np.int8)


def convert(y, target: LabelCoding) -> np.ndarray:
    return to_pm1(y) if target is LabelCoding.PLUS_MINUS_ONE else to_01(y)


@dataclass(frozen=True)
class Dataset:
    """n samples of p finite covariates with labels stored in {-1,+1}."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] = field(default=())
    label_name: str = "y"

    def __post_init__(self):
        X = np.array(self.features, dtype=float, copy=True)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if X.size else X.reshape(len(self.labels), 0)
        if X.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        if not np.all(np.isfinite(X)):
            i, j = np.argwhere(~np.isfinite(X))[0]
            raise DataError(f"non-finite feature value at row {i}, column {j}")
        y = to_pm1(self.labels) if len(self.labels) else np.zeros(0, dtype=np.int8)
        if y.shape[0] != X.shape[0]:
            raise DataError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} feature names for {X.shape[1]} columns")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def labels01(self) -> np.ndarray:
        return to_01(self.labels)

    def require_fit_ready(self) -> None:
        if self.n < 2:
            raise DataError("at least 2 samples are required to fit")
        if len(np.unique(self.labels)) < 2:
            raise DataError("both classes must be present to fit")

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.features[idx], self.labels[idx], self.feature_names, self.label_name)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.feature_names == other.feature_names
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None


def _parse_float(text: str, row: int, col: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"non-numeric value {text!r} at row {row}, column {col!r}") from None
    if not math.isfinite(v):
        raise DataError(f"non-finite value {text!r} at row {row}, column {col!r}")
    return v


def load_csv(path, label_column: str = "y") -> Dataset:
    """Read a headered CSV; every column except ``label_column`` is a feature.

    Labels may be coded {0,1} or {-1,1}; they are stored as {-1,+1}.
    Row numbers in error messages count the header as row 1.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row expected") from None
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not in header {header}")
        li = header.index(label_column)
        fcols = [j for j in range(len(header)) if j != li]
        rows, labels = [], []
        for r, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}: row {r} has {len(rec)} fields, expected {len(header)}")
            lab = _parse_float(rec[li], r, label_column)
            if lab not in (-1.0, 0.0, 1.0):
                raise DataError(f"{path}: non-binary label {rec[li]!r} at row {r}, column {label_column!r}")
            labels.append(lab)
            rows.append([_parse_float(rec[j], r, header[j]) for j in fcols])
    lab = np.array(labels)
    if (lab == -1).any() and (lab == 0).any():
        raise DataError(f"{path}: label column {label_column!r} mixes 0 and -1 codings")
    X = np.array(rows, dtype=float).reshape(len(rows), len(fcols))
    return Dataset(X, to_pm1(lab) if lab.size else lab, tuple(header[j] for j in fcols), label_column)


def save_csv(data: Dataset, path, label_coding: LabelCoding = LabelCoding.ZERO_ONE) -> None:
    """Write features (17 significant digits) and labels with a header row."""
    y = convert(data.labels, label_coding)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(data.feature_names) + [data.label_name])
        for row, lab in zip(data.features, y):
            w.writerow([f"{v:.17g}" for v in row] + [int(lab)])


def write_table(path, header: Sequence[str], rows) -> None:
    """Small helper for result CSVs; floats get 17 significant digits."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
