"""Independent brute-force oracles for the verification suite.

These deliberately share no code with the main clustering or coding paths:
the k-means oracle enumerates every assignment, the entropy and Rayleigh
helpers are the closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import EmptyInput, SizeExceeded

MAX_ORACLE_POINTS = 8
MAX_ORACLE_CLUSTERS = 3


@dataclass(frozen=True)
class OracleResult:
    optimal_wcss: float
    optimal_partition: tuple[int, ...]


def brute_force_kmeans(points, m: int) -> OracleResult:
    """Exact k-means optimum by exhaustive enumeration of all m^n assignments."""
    pts = np.asarray(points, dtype=np.complex128).reshape(-1)
    n = pts.size
    if n == 0:
        raise EmptyInput("no points")
    if n > MAX_ORACLE_POINTS or m > MAX_ORACLE_CLUSTERS or m < 1:
        raise SizeExceeded(
            f"oracle accepts n <= {MAX_ORACLE_POINTS}, 1 <= m <= {MAX_ORACLE_CLUSTERS}; "
            f"got n={n}, m={m}"
        )
    xy = np.stack([pts.real, pts.imag], axis=1)
    best_wcss = math.inf
    best_assign: tuple[int, ...] = ()
    for labels in product(range(m), repeat=n):
        lab = np.asarray(labels)
        wcss = 0.0
        for c in range(m):
            member = xy[lab == c]
            if member.shape[0]:
                centroid = member.mean(axis=0)
                wcss += float(((member - centroid) ** 2).sum())
        if wcss < best_wcss:
            best_wcss = wcss
            best_assign = labels
    return OracleResult(best_wcss, best_assign)


def entropy(counts) -> float:
    """Empirical Shannon entropy in bits per symbol."""
    if hasattr(counts, "values"):
        counts = list(counts.values())
    arr = np.asarray(counts, dtype=np.float64).reshape(-1)
    arr = arr[arr > 0]
    if arr.size == 0:
        return 0.0
    p = arr / arr.sum()
    return float(-(p * np.log2(p)).sum())


def rayleigh_cdf(t: float, sigma: float) -> float:
    """P(|w| < t) for a complex value with i.i.d. Normal(0, sigma^2) components."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if t <= 0:
        return 0.0
    return 1.0 - math.exp(-(t * t) / (2.0 * sigma * sigma))
