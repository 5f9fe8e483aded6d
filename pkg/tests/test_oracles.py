import math

import numpy as np
import pytest

from ccnz.errors import SizeExceeded
from ccnz.oracles import brute_force_kmeans, entropy, rayleigh_cdf


def c64(*vals):
    return np.array(vals, dtype=np.complex64)


def test_four_corners_optimum_is_one():
    res = brute_force_kmeans(c64(0, 1, 1j, 1 + 1j), 2)
    assert res.optimal_wcss == pytest.approx(1.0, abs=1e-12)


def test_m1_closed_form(rng):
    pts = (rng.normal(size=6) + 1j * rng.normal(size=6)).astype(np.complex64)
    res = brute_force_kmeans(pts, 1)
    mean = pts.astype(np.complex128).mean()
    expect = float((np.abs(pts.astype(np.complex128) - mean) ** 2).sum())
    assert res.optimal_wcss == pytest.approx(expect, rel=1e-12)


def test_m_equals_n_gives_zero():
    res = brute_force_kmeans(c64(1, 2j, 3 + 3j), 3)
    assert res.optimal_wcss == 0.0
    assert len(set(res.optimal_partition)) == 3


def test_size_limits():
    with pytest.raises(SizeExceeded):
        brute_force_kmeans(np.ones(9, dtype=np.complex64), 2)
    with pytest.raises(SizeExceeded):
        brute_force_kmeans(np.ones(4, dtype=np.complex64), 4)


def test_entropy():
    assert entropy({0: 5, 1: 5, 2: 5, 3: 5}) == pytest.approx(2.0)
    assert entropy({7: 100}) == 0.0
    assert entropy([1, 1]) == pytest.approx(1.0)


def test_rayleigh_cdf():
    assert rayleigh_cdf(0.0, 0.5) == 0.0
    assert rayleigh_cdf(1e9, 0.5) == pytest.approx(1.0)
    sigma = 0.3
    # solving 1 - exp(-t^2 / 2 sigma^2) = 1/2 gives t = sigma * sqrt(2 ln 2)
    assert rayleigh_cdf(sigma * math.sqrt(2 * math.log(2)), sigma) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        rayleigh_cdf(1.0, 0.0)
