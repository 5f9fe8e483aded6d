"""Threshold pruning of complex weights and the CSR form of a pruned layer.

A weight is removed when its comparison key falls strictly below the
threshold, so a threshold of zero is the exact identity. The default key is
the complex modulus; absolute real part and absolute imaginary part are the
two alternative schemes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import AllPrunedWarning, ShapeMismatch
from .model import COMPLEX_DTYPE, ComplexTensor, _frozen_complex64

PRUNE_KEYS = ("modulus", "real_part", "imag_part")


@dataclass(frozen=True)
class PruneConfig:
    threshold: float = 0.0
    key: str = "modulus"

    def __post_init__(self):
        t = float(self.threshold)
        if not (math.isfinite(t) and t >= 0.0):
            raise ValueError(f"threshold must be finite and >= 0, got {self.threshold!r}")
        if self.key not in PRUNE_KEYS:
            raise ValueError(f"key must be one of {PRUNE_KEYS}, got {self.key!r}")
        object.__setattr__(self, "threshold", t)


def matrix_dims(shape) -> tuple[int, int]:
    """2-D dims a tensor shape collapses to: 1xN, as-is, or (first, rest)."""
    shape = tuple(int(e) for e in shape)
    if len(shape) == 1:
        return 1, shape[0]
    if len(shape) == 2:
        return shape[0], shape[1]
    return shape[0], math.prod(shape[1:])


def matrixize(tensor: ComplexTensor) -> np.ndarray:
    """Row-major 2-D view of a tensor's values; original shape stays on the tensor."""
    rows, cols = matrix_dims(tensor.shape)
    return tensor.values.reshape(rows, cols)


def _frozen(arr: np.ndarray, dtype) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=dtype)
    if out.flags.writeable or out.base is not None:
        out = out.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class SparseComplexMatrix:
    """CSR matrix of surviving complex weights (uint32 structure, complex64 values)."""

    rows: int
    cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        rows, cols = int(self.rows), int(self.cols)
        if rows < 1 or cols < 1:
            raise ValueError(f"rows and cols must be positive, got {rows}x{cols}")
        row_ptr = _frozen(self.row_ptr, np.uint32)
        col_idx = _frozen(self.col_idx, np.uint32)
        values = _frozen_complex64(self.values)
        if row_ptr.shape != (rows + 1,):
            raise ValueError(f"row_ptr length {row_ptr.size} != rows+1 ({rows + 1})")
        if row_ptr[0] != 0 or np.any(np.diff(row_ptr.astype(np.int64)) < 0):
            raise ValueError("row_ptr must start at 0 and be non-decreasing")
        nnz = int(row_ptr[-1])
        if col_idx.size != nnz or values.size != nnz:
            raise ValueError(
                f"nnz mismatch: row_ptr says {nnz}, col_idx has {col_idx.size}, "
                f"values has {values.size}"
            )
        if nnz and int(col_idx.max()) >= cols:
            raise ValueError(f"column index {int(col_idx.max())} out of range for {cols} cols")
        if nnz > 1:
            # non-increasing steps in col_idx are legal only at row boundaries
            drops = np.flatnonzero(np.diff(col_idx.astype(np.int64)) <= 0) + 1
            if drops.size and not np.isin(drops, row_ptr[1:rows]).all():
                raise ValueError("col_idx must be strictly increasing within each row")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "row_ptr", row_ptr)
        object.__setattr__(self, "col_idx", col_idx)
        object.__setattr__(self, "values", values)

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseComplexMatrix):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and np.array_equal(self.row_ptr, other.row_ptr)
            and np.array_equal(self.col_idx, other.col_idx)
            and np.array_equal(self.values.view(np.uint64), other.values.view(np.uint64))
        )


def empty_sparse(rows: int, cols: int) -> SparseComplexMatrix:
    return SparseComplexMatrix(
        rows,
        cols,
        np.zeros(rows + 1, dtype=np.uint32),
        np.zeros(0, dtype=np.uint32),
        np.zeros(0, dtype=COMPLEX_DTYPE),
    )


def _prune_keys(dense: np.ndarray, key: str) -> np.ndarray:
    # keys computed in float64 so the threshold comparison is not degraded
    # by a float32 intermediate
    if key == "modulus":
        return np.abs(dense.astype(np.complex128))
    if key == "real_part":
        return np.abs(dense.real.astype(np.float64))
    return np.abs(dense.imag.astype(np.float64))


def prune(tensor: ComplexTensor, cfg: PruneConfig) -> SparseComplexMatrix:
    """Drop weights whose key is strictly below the threshold; keep the rest bit-exactly.

    Emits AllPrunedWarning when nothing survives; the empty CSR matrix is
    still a valid result.
    """
    dense = matrixize(tensor)
    mask = _prune_keys(dense, cfg.key) >= cfg.threshold
    counts = mask.sum(axis=1, dtype=np.int64)
    row_ptr = np.zeros(dense.shape[0] + 1, dtype=np.uint32)
    np.cumsum(counts, out=row_ptr[1:])
    col_idx = np.nonzero(mask)[1].astype(np.uint32)
    values = dense[mask]
    if values.size == 0 and tensor.weight_count > 0:
        warnings.warn(
            AllPrunedWarning(
                f"layer {tensor.name!r}: all {tensor.weight_count} weights pruned "
                f"at threshold {cfg.threshold}"
            ),
            stacklevel=2,
        )
    return SparseComplexMatrix(dense.shape[0], dense.shape[1], row_ptr, col_idx, values)


def pruning_ratio(before: ComplexTensor, after: SparseComplexMatrix) -> float:
    """Fraction of weights removed: (n - nnz) / n."""
    if matrix_dims(before.shape) != (after.rows, after.cols):
        raise ShapeMismatch(
            f"tensor shape {before.shape} does not collapse to {after.rows}x{after.cols}"
        )
    n = before.weight_count
    return (n - after.nnz) / n


def densify(
    sparse: SparseComplexMatrix, original_shape, name: str = ""
) -> ComplexTensor:
    """Inverse of prune: stored values back in place, zeros at pruned positions."""
    shape = tuple(int(e) for e in original_shape)
    if matrix_dims(shape) != (sparse.rows, sparse.cols):
        raise ShapeMismatch(
            f"shape {shape} does not collapse to {sparse.rows}x{sparse.cols}"
        )
    dense = np.zeros((sparse.rows, sparse.cols), dtype=COMPLEX_DTYPE)
    lengths = np.diff(sparse.row_ptr.astype(np.int64))
    rows = np.repeat(np.arange(sparse.rows), lengths)
    dense[rows, sparse.col_idx] = sparse.values
    return ComplexTensor(name, shape, dense.reshape(-1))
