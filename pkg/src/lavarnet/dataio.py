"""CSV ingestion, preprocessing, chronological splits and sliding windows."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np


class DataError(ValueError):
    pass


def load_csv(path) -> tuple[np.ndarray, list[str]]:
    """Read a header + numeric body CSV; empty cells become NaN."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(row)} cells, header has {len(header)}")
            parsed = []
            for col, cell in enumerate(row, start=1):
                cell = cell.strip()
                if cell == "":
                    parsed.append(np.nan)
                    continue
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: row {lineno}, column {col} ({header[col - 1]!r}): non-numeric value {cell!r}"
                    ) from None
            rows.append(parsed)
    return np.array(rows, dtype=np.float64).reshape(len(rows), len(header)), header


def write_csv(path, values: np.ndarray, columns: Sequence[str] | None = None) -> None:
    values = np.asarray(values, dtype=np.float64)
    if columns is None:
        columns = [f"v{i + 1}" for i in range(values.shape[1])]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in values:
            w.writerow(["" if np.isnan(v) else format(v, ".17g") for v in row])


def linear_interpolate_missing(values: np.ndarray) -> np.ndarray:
    """Fill NaNs linearly between observed neighbors; edges take the nearest observation."""
    values = np.array(values, dtype=np.float64)
    idx = np.arange(values.shape[0])
    for c in range(values.shape[1]):
        col = values[:, c]
        seen = ~np.isnan(col)
        if not seen.any():
            raise DataError(f"column {c + 1} has no observed values")
        if not seen.all():
            col[~seen] = np.interp(idx[~seen], idx[seen], col[seen])
    return values


def drop_sparse_or_constant(values: np.ndarray, columns: Sequence[str], targets: Sequence[str] = (),
                            max_zeros: int | None = 100, drop_constant: bool = True):
    """Remove input columns with more than ``max_zeros`` zeros or a single value.

    Target columns always survive.  Returns ``(values, columns)``.
    """
    keep = []
    for c, name in enumerate(columns):
        col = values[:, c]
        if name in targets:
            keep.append(c)
            continue
        if max_zeros is not None and np.count_nonzero(col == 0.0) > max_zeros:
            continue
        if drop_constant and np.nanmax(col) == np.nanmin(col):
            continue
        keep.append(c)
    if not keep:
        raise DataError("every column was dropped")
    return values[:, keep], [columns[c] for c in keep]


def moving_average(values: np.ndarray, order: int = 4) -> np.ndarray:
    """Trailing mean of the last ``order`` rows; early rows use the history available."""
    values = np.asarray(values, dtype=np.float64)
    if order < 1:
        raise ValueError("order must be >= 1")
    if values.shape[0] < order:
        raise DataError(f"series of {values.shape[0]} rows is shorter than filter order {order}")
    total = values.copy()
    for lag in range(1, order):
        total[lag:] += values[:-lag]
    counts = np.minimum(np.arange(1, values.shape[0] + 1), order).astype(np.float64)
    return total / counts.reshape((-1,) + (1,) * (values.ndim - 1))


def split_bounds(L: int, fractions: Sequence[float] = (0.6, 0.2, 0.2),
                 counts: Sequence[int] | None = None) -> tuple[int, int, int]:
    """Row boundaries (train_end, val_end, L) of a chronological split."""
    if counts is not None:
        n_train, n_val, n_test = (int(c) for c in counts)
        if n_train + n_val + n_test != L:
            raise DataError(f"split counts {tuple(counts)} do not sum to series length {L}")
    else:
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise DataError(f"split fractions {tuple(fractions)} do not sum to 1")
        n_train = int(np.floor(fractions[0] * L))
        n_val = int(np.floor(fractions[1] * L))
        n_test = L - n_train - n_val
    if min(n_train, n_val, n_test) <= 0:
        raise DataError(f"empty split: train={n_train}, val={n_val}, test={n_test}")
    return n_train, n_train + n_val, L


@dataclass(frozen=True)
class Dataset:
    values: np.ndarray
    columns: tuple
    bounds: tuple
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "columns", tuple(self.columns))
        train_end, val_end, L = self.bounds
        if not (0 < train_end < val_end < L == values.shape[0]):
            raise DataError(f"bounds {self.bounds} do not partition {values.shape[0]} rows")

    @property
    def splits(self) -> dict[str, tuple[int, int]]:
        train_end, val_end, L = self.bounds
        return {"train": (0, train_end), "val": (train_end, val_end), "test": (val_end, L)}

    def column_index(self, names: Sequence[str]) -> list[int]:
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise DataError(f"unknown target columns {missing}")
        return [self.columns.index(n) for n in names]

    def denormalize(self, values: np.ndarray, cols: Sequence[int]) -> np.ndarray:
        if self.mean is None:
            return np.asarray(values, dtype=np.float64)
        return np.asarray(values) * self.std[list(cols)] + self.mean[list(cols)]


def split(values: np.ndarray, columns: Sequence[str], fractions=(0.6, 0.2, 0.2), counts=None) -> Dataset:
    return Dataset(values, columns, split_bounds(len(values), fractions, counts))


def zscore(dataset: Dataset) -> Dataset:
    """Standardize every column with statistics of the training rows only."""
    train = dataset.values[: dataset.bounds[0]]
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    for c, s in enumerate(std):
        if not s > 0:
            raise DataError(f"column {dataset.columns[c]!r} is constant on the training split")
    return Dataset((dataset.values - mean) / std, dataset.columns, dataset.bounds, mean, std)


class Windows(NamedTuple):
    X: np.ndarray            # (N, T, K) input windows
    Y: np.ndarray            # (N, K_out) next-step targets
    target_rows: np.ndarray  # (N,) absolute row index of each target


def make_windows(dataset: Dataset, T: int, targets: Sequence[int] | None = None) -> dict[str, Windows]:
    """Sliding windows built inside each split; no window crosses a boundary."""
    targets = list(range(len(dataset.columns))) if targets is None else list(targets)
    out = {}
    for name, (start, end) in dataset.splits.items():
        length = end - start
        if length < T + 1:
            raise DataError(f"{name} split has {length} rows, needs at least T+1={T + 1}")
        block = dataset.values[start:end]
        N = length - T
        idx = np.arange(N)[:, None] + np.arange(T)[None, :]
        X = block[idx]
        Y = block[T:][:, targets]
        out[name] = Windows(X, Y, np.arange(start + T, end))
    return out


def write_predictions(path, rows: np.ndarray, names: Sequence[str], actual: np.ndarray,
                      predicted: np.ndarray) -> None:
    """Long-format ``t, target, actual, predicted``; one line per (row, target)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "target", "actual", "predicted"])
        for i, t in enumerate(rows):
            for j, name in enumerate(names):
                w.writerow([int(t), name, format(actual[i, j], ".17g"), format(predicted[i, j], ".17g")])
