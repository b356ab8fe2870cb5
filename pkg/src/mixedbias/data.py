"""Columnar observation store and the empirical mean operator."""
from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from . import kernels
from .errors import DataError, EvaluationError


class Dataset:
    """Immutable column store; each row is one draw of the observation vector.

    Parameters
    ----------
    columns : mapping of str to array_like
        Column name to values. All columns must share one length ``n >= 1``
        and contain finite reals only.
    """

    __slots__ = ("_columns", "_n")

    def __init__(self, columns: Mapping[str, object]):
        if not columns:
            raise DataError("dataset has no columns")
        cols = {}
        n = None
        for name, values in columns.items():
            arr = np.array(values, dtype=np.float64).reshape(-1)
            if n is None:
                n = arr.shape[0]
            elif arr.shape[0] != n:
                raise DataError(
                    f"column {name!r} has {arr.shape[0]} rows, expected {n}"
                )
            bad = np.flatnonzero(~np.isfinite(arr))
            if bad.size:
                raise DataError(
                    f"non-finite value in column {name!r} at row {int(bad[0])}"
                )
            arr.flags.writeable = False
            cols[str(name)] = arr
        if n == 0:
            raise DataError("dataset has zero rows")
        self._columns = cols
        self._n = n

    @property
    def n(self) -> int:
        return self._n

    def __len__(self) -> int:
        return self._n

    @property
    def names(self) -> tuple:
        return tuple(self._columns)

    def __contains__(self, name) -> bool:
        return name in self._columns

    def column(self, name: str) -> np.ndarray:
        try:
            return self._columns[name]
        except KeyError:
            raise DataError(
                f"no column named {name!r}; available: {sorted(self._columns)}"
            ) from None

    def __getitem__(self, name: str) -> np.ndarray:
        return self.column(name)

    def row(self, index: int) -> Dataset:
        """One-row view of observation ``index``."""
        if not 0 <= index < self._n:
            raise IndexError(f"row {index} out of range for n={self._n}")
        return Dataset({k: v[index : index + 1] for k, v in self._columns.items()})

    def take(self, indices) -> Dataset:
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset({k: v[idx] for k, v in self._columns.items()})

    def to_dict(self) -> dict:
        return {k: v.copy() for k, v in self._columns.items()}

    def __repr__(self):
        return f"Dataset(n={self._n}, columns={list(self._columns)})"


def check_finite(values, what: str = "value") -> np.ndarray:
    """Return ``values`` as float64, raising on the first non-finite row."""
    arr = np.asarray(values, dtype=np.float64)
    finite = np.isfinite(arr)
    if not finite.all():
        if arr.ndim > 1:
            finite = finite.all(axis=tuple(range(1, arr.ndim)))
        row = int(np.flatnonzero(~finite)[0])
        raise EvaluationError(f"non-finite {what} at row {row}", row=row)
    return arr


def mean(values, what: str = "value") -> float:
    """Compensated mean of a per-row vector, with finiteness checking."""
    arr = check_finite(values, what).reshape(-1)
    return float(kernels.compensated_mean(np.ascontiguousarray(arr)))


def colmeans(values, what: str = "value") -> np.ndarray:
    arr = check_finite(values, what)
    if arr.ndim == 1:
        arr = arr[:, None]
    return np.asarray(kernels.compensated_colmeans(np.ascontiguousarray(arr)))


def empirical_mean(dataset: Dataset, f: Callable[[Dataset], object]) -> float:
    """Empirical mean of ``f`` over the rows of ``dataset``.

    ``f`` receives the dataset (a row view when evaluated row by row) and
    returns one value per row; a scalar is broadcast to all rows.
    """
    values = np.asarray(f(dataset), dtype=np.float64)
    if values.ndim == 0:
        values = np.full(dataset.n, float(values))
    if values.shape != (dataset.n,):
        raise EvaluationError(
            f"function returned shape {values.shape}, expected ({dataset.n},)"
        )
    return mean(values, "function value")
