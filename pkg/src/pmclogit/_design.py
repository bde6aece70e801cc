"""Column extraction shared by the estimators.

Estimators accept anything column-addressable: a BondDataset (which exposes
``column(name)``) or a plain mapping of name -> array-like, which keeps unit
tests and ad-hoc use light.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError


def get_column(data, name: str) -> np.ndarray:
    if hasattr(data, "column"):
        return np.asarray(data.column(name))
    try:
        return np.asarray(data[name])
    except (KeyError, IndexError, TypeError):
        raise DataError(f"column {name!r} not found in data") from None


def response_codes(data, name: str, n_categories: int) -> np.ndarray:
    """1-based integer response codes, checked against the declared categories."""
    raw = get_column(data, name)
    if raw.size == 0:
        raise DataError("empty dataset")
    codes = np.asarray(raw, dtype=np.int64)
    if not np.array_equal(codes, np.asarray(raw, dtype=np.float64)):
        raise DataError(f"response column {name!r} holds non-integer codes")
    if codes.min() < 1 or codes.max() > n_categories:
        raise DataError(
            f"response codes must lie in 1..{n_categories}; "
            f"found range [{codes.min()}, {codes.max()}]"
        )
    return codes


def design_matrix(data, names, n_rows: int) -> np.ndarray:
    """(n, k) float64 C-contiguous covariate matrix in the given column order."""
    if not names:
        return np.zeros((n_rows, 0))
    cols = []
    for name in names:
        col = np.asarray(get_column(data, name), dtype=np.float64)
        if col.ndim != 1:
            raise DataError(f"covariate column {name!r} is not one-dimensional")
        if len(col) != n_rows:
            raise DataError(
                f"covariate column {name!r} has {len(col)} rows, expected {n_rows}"
            )
        if not np.all(np.isfinite(col)):
            raise DataError(f"covariate column {name!r} holds non-finite values")
        cols.append(col)
    return np.ascontiguousarray(np.column_stack(cols))
