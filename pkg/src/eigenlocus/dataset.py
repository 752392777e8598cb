"""Labeled two-class datasets and their CSV representation.

CSV layout: header ``label,f1,...,fd`` followed by one row per point, label
``+1`` or ``-1``.  Floats are written with 17 significant digits so a
save/load round trip is lossless.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2 or X.shape[1] == 0:
            raise ValueError(f"X must be N x d with d >= 1, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError(f"X has {X.shape[0]} rows but y has shape {y.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("X has non-finite entries")
        if not np.all((y == 1.0) | (y == -1.0)):
            raise ValueError("labels must be +1 or -1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_classes(cls, class1, class2) -> "LabeledDataset":
        """Stack class-one points (label +1) over class-two points (label -1)."""
        a = np.atleast_2d(np.asarray(class1, dtype=float))
        b = np.atleast_2d(np.asarray(class2, dtype=float))
        return cls(np.vstack([a, b]), np.r_[np.ones(len(a)), -np.ones(len(b))])

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def has_both_classes(self) -> bool:
        return bool(np.any(self.y > 0) and np.any(self.y < 0))

    def class_points(self, label: int) -> np.ndarray:
        return self.X[self.y == label]

    def negated(self) -> "LabeledDataset":
        return LabeledDataset(self.X, -self.y)

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.X[idx], self.y[idx])


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def save_csv(data: LabeledDataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["label"] + [f"f{k + 1}" for k in range(data.d)])
        for xi, yi in zip(data.X, data.y):
            w.writerow(["+1" if yi > 0 else "-1"] + [_fmt(v) for v in xi])


def load_csv(path) -> LabeledDataset:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0] != "label":
        raise DatasetFormatError(f"{path}: header must be 'label,f1,...,fd'")
    d = len(header) - 1
    X, y = [], []
    for r, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != d + 1:
            raise DatasetFormatError(
                f"{path}: row {r} has {len(row)} columns, expected {d + 1}")
        try:
            lab = float(row[0])
        except ValueError:
            raise DatasetFormatError(f"{path}: row {r}, column 1: bad label {row[0]!r}") from None
        if lab not in (1.0, -1.0):
            raise DatasetFormatError(f"{path}: row {r}, column 1: label must be +1 or -1, got {row[0]!r}")
        vals = []
        for c, cell in enumerate(row[1:], start=2):
            try:
                vals.append(float(cell))
            except ValueError:
                raise DatasetFormatError(f"{path}: row {r}, column {c}: bad number {cell!r}") from None
        X.append(vals)
        y.append(lab)
    if not X:
        raise DatasetFormatError(f"{path}: no data rows")
    return LabeledDataset(np.array(X), np.array(y))
