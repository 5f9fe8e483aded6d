"""Two-dimensional k-means weight sharing over complex weights.

Points are the surviving weights of a layer, treated as (re, im) pairs in
the plane. Lloyd's algorithm minimizes the within-cluster sum of squared
Euclidean distances; the resulting centroids form the layer's codebook and
each weight is replaced by a codebook index.

Six centroid initializations are provided: Forgy (random data points),
density-based (equal-mass quantiles along the principal line), and four
linear schemes that spread centroids evenly along a line fitted to the
weight distribution (horizontal, vertical, positive and negative incline).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, IndexOutOfRange
from .model import COMPLEX_DTYPE
from .pruning import SparseComplexMatrix, _frozen

INIT_KINDS = (
    "forgy",
    "density",
    "linear_horizontal",
    "linear_vertical",
    "linear_positive",
    "linear_negative",
)
SEEDED_KINDS = ("forgy", "density")
LINEAR_KINDS = INIT_KINDS[2:]

MAX_CLUSTERS = 65535
DEFAULT_MAX_ITERS = 300
DEFAULT_REL_TOL = 1e-6

# distance-matrix budget for one assignment block (elements). The block
# size is a pure function of the cluster count, never of data size or
# thread count, so reduction order and results stay reproducible.
_ASSIGN_BUDGET = 1 << 22


@dataclass(frozen=True)
class InitScheme:
    """Centroid initialization scheme; randomized kinds carry an explicit seed."""

    kind: str
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise ValueError(f"kind must be one of {INIT_KINDS}, got {self.kind!r}")
        if self.kind in SEEDED_KINDS:
            if self.seed is None:
                raise ValueError(f"{self.kind} initialization requires a seed")
            if not 0 <= int(self.seed) < 2**64:
                raise ValueError(f"seed must fit in 64 bits, got {self.seed!r}")
            object.__setattr__(self, "seed", int(self.seed))
        elif self.seed is not None:
            raise ValueError(f"{self.kind} initialization takes no seed")

    @classmethod
    def forgy(cls, seed: int) -> "InitScheme":
        return cls("forgy", seed)

    @classmethod
    def density(cls, seed: int) -> "InitScheme":
        return cls("density", seed)

    @classmethod
    def linear_horizontal(cls) -> "InitScheme":
        return cls("linear_horizontal")

    @classmethod
    def linear_vertical(cls) -> "InitScheme":
        return cls("linear_vertical")

    @classmethod
    def linear_positive(cls) -> "InitScheme":
        return cls("linear_positive")

    @classmethod
    def linear_negative(cls) -> "InitScheme":
        return cls("linear_negative")


@dataclass(frozen=True, eq=False)
class Codebook:
    """Ordered shared-weight centroids. Empty only for layers with no survivors.

    The entry count is fixed, but centroid values stay writable so an
    external training loop can fine-tune the shared weights in place.
    """

    centroids: np.ndarray

    def __post_init__(self):
        cent = np.ascontiguousarray(self.centroids, dtype=COMPLEX_DTYPE).reshape(-1)
        if cent.base is not None or not cent.flags.writeable:
            cent = cent.copy()
        if cent.size > MAX_CLUSTERS:
            raise ValueError(f"codebook size {cent.size} exceeds {MAX_CLUSTERS}")
        if cent.size and not np.isfinite(cent).all():
            raise ValueError("codebook contains non-finite centroids")
        object.__setattr__(self, "centroids", cent)

    def __len__(self) -> int:
        return self.centroids.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, Codebook):
            return NotImplemented
        return np.array_equal(
            self.centroids.view(np.uint64), other.centroids.view(np.uint64)
        )


@dataclass(frozen=True)
class KMeansReport:
    iterations: int
    final_wcss: float
    converged: bool
    wcss_trace: tuple[float, ...]
    max_distance: float


@dataclass(frozen=True, eq=False)
class QuantizedLayer:
    """Sparse structure plus per-nonzero codebook indices; values are dropped."""

    rows: int
    cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    codebook: Codebook
    indices: np.ndarray
    original_shape: tuple[int, ...]

    def __post_init__(self):
        row_ptr = _frozen(self.row_ptr, np.uint32)
        col_idx = _frozen(self.col_idx, np.uint32)
        indices = _frozen(self.indices, np.uint32)
        nnz = int(row_ptr[-1])
        if col_idx.size != nnz or indices.size != nnz:
            raise ValueError(
                f"nnz mismatch: row_ptr says {nnz}, col_idx {col_idx.size}, "
                f"indices {indices.size}"
            )
        if nnz and int(indices.max()) >= len(self.codebook):
            raise IndexOutOfRange(
                f"index {int(indices.max())} out of range for "
                f"{len(self.codebook)}-entry codebook"
            )
        object.__setattr__(self, "rows", int(self.rows))
        object.__setattr__(self, "cols", int(self.cols))
        object.__setattr__(self, "row_ptr", row_ptr)
        object.__setattr__(self, "col_idx", col_idx)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "original_shape", tuple(int(e) for e in self.original_shape))

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])


def _canonical_c64(arr: np.ndarray) -> np.ndarray:
    # adding +0.0 maps -0.0 components to +0.0 so codebooks and the
    # split-component dictionaries agree bit-for-bit
    return arr.astype(COMPLEX_DTYPE) + np.complex64(0)


def _points_xy(points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pts = np.asarray(points, dtype=COMPLEX_DTYPE).reshape(-1)
    if pts.size == 0:
        raise EmptyInput("no points to cluster")
    return pts, pts.real.astype(np.float64), pts.imag.astype(np.float64)


def _line_direction(x: np.ndarray, y: np.ndarray, kind: str) -> tuple[float, float]:
    """Unit direction of the support line for a linear or density scheme."""
    if kind == "linear_horizontal":
        return 1.0, 0.0
    if kind == "linear_vertical":
        return 0.0, 1.0
    mx, my = x.mean(), y.mean()
    var_x = float(np.sum((x - mx) ** 2))
    cov = float(np.sum((x - mx) * (y - my)))
    slope = cov / var_x if var_x > 0.0 else 0.0
    if kind == "density":
        # unforced least-squares line; vertical when re carries no variance
        if var_x == 0.0:
            return 0.0, 1.0
    else:
        slope = abs(slope)
        if slope == 0.0:
            sx = float(np.std(x))
            sy = float(np.std(y))
            ratio = sy / sx if sx > 0.0 else math.inf
            slope = ratio if math.isfinite(ratio) and ratio > 0.0 else 1.0
        if kind == "linear_negative":
            slope = -slope
    norm = math.hypot(1.0, slope)
    return 1.0 / norm, slope / norm


def init_centroids(points, m: int, scheme: InitScheme) -> Codebook:
    """Place m initial centroids according to `scheme`.

    All-identical inputs are not an error: every scheme then yields m copies
    of that point.
    """
    pts, x, y = _points_xy(points)
    m = int(m)
    if m < 1:
        raise ValueError(f"cluster count must be >= 1, got {m}")
    if m > MAX_CLUSTERS:
        raise ValueError(f"cluster count {m} exceeds {MAX_CLUSTERS}")

    if scheme.kind == "forgy":
        distinct = np.unique(pts)
        rng = np.random.default_rng(scheme.seed)
        pick = rng.choice(distinct.size, size=m, replace=m > distinct.size)
        return Codebook(_canonical_c64(distinct[pick]))

    dx, dy = _line_direction(x, y, scheme.kind)
    px, py = x.mean(), y.mean()
    t = (x - px) * dx + (y - py) * dy

    if scheme.kind == "density":
        # midpoints of m equal-mass bins of the projection distribution;
        # the scheme carries a seed like forgy does, but quantile placement
        # is deterministic and never consumes it
        levels = (np.arange(m) + 0.5) / m
        ts = np.quantile(t, levels)
    else:
        lo, hi = float(t.min()), float(t.max())
        ts = np.array([(lo + hi) / 2.0]) if m == 1 else np.linspace(lo, hi, m)

    cent = (px + ts * dx) + 1j * (py + ts * dy)
    return Codebook(_canonical_c64(cent))


def _assign(x: np.ndarray, y: np.ndarray, cent: np.ndarray):
    """Nearest-centroid assignment; ties go to the lowest centroid index."""
    cx = cent.real.astype(np.float64)
    cy = cent.imag.astype(np.float64)
    n = x.size
    block = max(1, _ASSIGN_BUDGET // cent.size)
    assign = np.empty(n, dtype=np.int64)
    wcss = 0.0
    max_d2 = 0.0
    for start in range(0, n, block):
        sl = slice(start, min(start + block, n))
        d2 = (x[sl, None] - cx) ** 2 + (y[sl, None] - cy) ** 2
        idx = d2.argmin(axis=1)
        best = d2[np.arange(idx.size), idx]
        assign[sl] = idx
        wcss += float(best.sum())
        if best.size:
            max_d2 = max(max_d2, float(best.max()))
    return assign, wcss, max_d2


def lloyd(
    points,
    initial,
    max_iters: int = DEFAULT_MAX_ITERS,
    rel_tol: float = DEFAULT_REL_TOL,
) -> tuple[Codebook, np.ndarray, KMeansReport]:
    """Run Lloyd's algorithm from explicit initial centroids.

    Centroids are snapped to complex64 after every update so the returned
    codebook, assignment, and recorded objective are mutually consistent:
    the trace is non-increasing and re-assigning against the final codebook
    is a fixed point.
    """
    pts, x, y = _points_xy(points)
    cent = _canonical_c64(np.asarray(initial, dtype=COMPLEX_DTYPE).reshape(-1))
    if cent.size == 0:
        raise EmptyInput("no initial centroids")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    m = cent.size

    trace: list[float] = []
    converged = False
    assign = None
    max_d2 = 0.0
    for it in range(max_iters):
        assign, wcss, max_d2 = _assign(x, y, cent)
        trace.append(wcss)
        if it > 0:
            prev = trace[-2]
            decrease = (prev - wcss) / prev if prev > 0.0 else 0.0
            if decrease < rel_tol:
                converged = True
                break
        if it == max_iters - 1:
            break
        counts = np.bincount(assign, minlength=m)
        sx = np.bincount(assign, weights=x, minlength=m)
        sy = np.bincount(assign, weights=y, minlength=m)
        safe = np.maximum(counts, 1)
        new = _canonical_c64((sx / safe) + 1j * (sy / safe))
        for j in np.flatnonzero(counts == 0):
            # reseed an emptied cluster to the point farthest from its
            # stale centroid; argmax resolves ties to the lowest flat index
            d2 = (x - float(cent.real[j])) ** 2 + (y - float(cent.imag[j])) ** 2
            new[j] = pts[int(d2.argmax())] + np.complex64(0)
        cent = new

    report = KMeansReport(
        iterations=len(trace),
        final_wcss=trace[-1],
        converged=converged,
        wcss_trace=tuple(trace),
        max_distance=math.sqrt(max_d2),
    )
    return Codebook(cent), assign.astype(np.uint32), report


def kmeans2d(
    points,
    m: int,
    scheme: InitScheme,
    max_iters: int = DEFAULT_MAX_ITERS,
    rel_tol: float = DEFAULT_REL_TOL,
) -> tuple[Codebook, np.ndarray, KMeansReport]:
    """Cluster complex points into m shared values: init + Lloyd iteration."""
    init = init_centroids(points, m, scheme)
    return lloyd(points, init.centroids, max_iters=max_iters, rel_tol=rel_tol)


def quantize_layer(
    sparse: SparseComplexMatrix,
    m: int,
    scheme: InitScheme,
    max_iters: int = DEFAULT_MAX_ITERS,
    rel_tol: float = DEFAULT_REL_TOL,
    original_shape=None,
) -> tuple[QuantizedLayer, KMeansReport]:
    """Cluster a layer's surviving weights; pruned positions never enter the point set.

    A layer with no survivors quantizes to an empty codebook and a
    zero-length index array, which is valid.
    """
    shape = tuple(original_shape) if original_shape is not None else (sparse.rows, sparse.cols)
    if sparse.nnz == 0:
        q = QuantizedLayer(
            sparse.rows,
            sparse.cols,
            sparse.row_ptr,
            sparse.col_idx,
            Codebook(np.zeros(0, dtype=COMPLEX_DTYPE)),
            np.zeros(0, dtype=np.uint32),
            shape,
        )
        return q, KMeansReport(0, 0.0, True, (), 0.0)
    codebook, indices, report = kmeans2d(
        sparse.values, m, scheme, max_iters=max_iters, rel_tol=rel_tol
    )
    q = QuantizedLayer(
        sparse.rows, sparse.cols, sparse.row_ptr, sparse.col_idx, codebook, indices, shape
    )
    return q, report


def dequantize_layer(q: QuantizedLayer) -> SparseComplexMatrix:
    """Replace every index by its centroid, bit-exactly."""
    values = q.codebook.centroids[q.indices] if q.nnz else np.zeros(0, dtype=COMPLEX_DTYPE)
    return SparseComplexMatrix(q.rows, q.cols, q.row_ptr, q.col_idx, values)
