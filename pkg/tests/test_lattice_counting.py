import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from zkw.errors import TruncationExceeded
from zkw.lattice_counting import (AxisRectangle, Strip, count_rectangle, count_strip,
                                  count_strip_irrational_torus, liouville_certificate,
                                  liouville_floor)
from zkw.spectral_lattice import SYM_MATRIX, DualLattice

SQ3 = math.sqrt(3)
TOL = 1e-9


def brute_strip(ell, w, alpha, lam, yscale=1.0):
    """Enumerate lattice points and solve c1 v1 + c2 v2 = x + alpha for each."""
    basis = np.array([[1.0, -1.0], [SQ3, SQ3]])
    reach = (ell + w) * 2 + 3
    n = int(np.ceil(reach * lam)) + 2
    a, b = np.meshgrid(np.arange(-n, n + 1), np.arange(-n, n + 1), indexing="ij")
    pts = np.stack([a.ravel() / lam + alpha[0], yscale * b.ravel() / lam + alpha[1]])
    c = np.linalg.solve(basis, pts)
    return int(np.sum((np.abs(c[0]) <= ell + TOL) & (np.abs(c[1]) <= w + TOL)))


def brute_rectangle(c1, c2, alpha, lam, matrix):
    n = int(np.ceil(4 * (c1 + c2 + 2) * lam))
    a, b = np.meshgrid(np.arange(-n, n + 1), np.arange(-n, n + 1), indexing="ij")
    k = np.stack([a.ravel() / lam, b.ravel() / lam])
    l = matrix @ k
    return int(np.sum((np.abs(l[0] + alpha[0]) <= c1 + TOL) & (np.abs(l[1] + alpha[1]) <= c2 + TOL)))


def test_strip_examples():
    lat = DualLattice(1, 100)
    assert count_strip(Strip(0.3, 0.01), lat) >= 1
    assert count_strip(Strip(0.25, 0.25), lat) == 1
    assert brute_strip(0.25, 0.25, (0, 0), 1) == 1
    n0 = count_strip(Strip(10, 2), lat)
    assert n0 == brute_strip(10, 2, (0, 0), 1)
    assert n0 <= 64 * 10 * 2


@given(st.floats(0.05, 12), st.floats(0.05, 3), st.floats(-1, 1), st.floats(-1, 1), st.integers(1, 3))
def test_strip_count_matches_enumeration(ell, w, ax, ay, lam):
    got = count_strip(Strip(ell, w, (ax, ay)), DualLattice(lam, 200))
    assert got == brute_strip(ell, w, (ax, ay), lam)


@given(st.floats(0.05, 12), st.floats(0.005, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_irrational_torus_matches_enumeration(ell, w, ax, ay):
    got = count_strip_irrational_torus(Strip(ell, w, (ax, ay)), 1)
    assert got == brute_strip(ell, w, (ax, ay), 1, yscale=SQ3)


def test_irrational_torus_examples():
    # (q, sqrt(3) q) = 2q v1 / 2 sits on the v1 axis
    assert count_strip_irrational_torus(Strip(16, 0.01), 1) >= 16
    assert count_strip_irrational_torus(Strip(1, 1), 1) >= 1
    counts = [count_strip_irrational_torus(Strip(ell, 0.01), 1) for ell in (8, 16, 32)]
    for a, b in zip(counts, counts[1:]):
        assert 1.0 <= b / a <= 4.0
        assert b / a == pytest.approx(2.0, rel=0.5)


@given(st.floats(0.05, 20), st.floats(0.05, 1), st.integers(1, 3))
def test_strip_bound_on_rational_lattice(ell, w, lam):
    if ell * w < 1:
        return
    n = count_strip(Strip(ell, w), DualLattice(lam, 200))
    assert n <= 64 * ell * w * lam * lam


def test_liouville_examples():
    assert liouville_certificate(1, 2) == pytest.approx(2 - SQ3, rel=1e-14)
    assert liouville_certificate(4, 7) == pytest.approx(abs(SQ3 - 7 / 4) * 16, rel=1e-14)
    assert liouville_certificate(4, 7) == pytest.approx(0.287, abs=1e-3)
    with pytest.raises(ValueError):
        liouville_certificate(0, 1)


def test_liouville_floor_against_scan():
    floor, q, p = liouville_floor(10 ** 4)
    scan = min(min(abs(SQ3 - pp / qq) * qq * qq for pp in (int(SQ3 * qq), int(SQ3 * qq) + 1))
               for qq in range(1, 10 ** 4 + 1))
    assert floor == pytest.approx(scan, rel=1e-12)
    assert floor >= 0.2
    assert liouville_certificate(q, p) == pytest.approx(floor, rel=1e-12)


def test_rectangle_examples():
    assert count_rectangle(AxisRectangle(1e-6, 1e-6, (0.5, 0.5))) == 0
    assert count_rectangle(AxisRectangle(5, 5)) == 121
    assert count_rectangle(AxisRectangle(5, 5)) == brute_rectangle(5, 5, (0, 0), 1, np.eye(2))


@given(st.floats(0.1, 6), st.floats(0.1, 6), st.floats(-1, 1), st.floats(-1, 1),
       st.sampled_from(["Z", "M"]), st.integers(1, 2))
def test_rectangle_matches_enumeration(c1, c2, ax, ay, lat, lam):
    rect = AxisRectangle(c1, c2, (ax, ay), lat, lam)
    m = SYM_MATRIX if lat == "M" else np.eye(2)
    assert count_rectangle(rect) == brute_rectangle(c1, c2, (ax, ay), lam, m)


def test_rectangle_pullback_consistency():
    rect = AxisRectangle(4.0, 3.0, (0.2, -0.1), "M", 2)
    n = 40
    a, b = np.meshgrid(np.arange(-n, n + 1), np.arange(-n, n + 1), indexing="ij")
    inside = rect.contains_pullback(a / 2, b / 2)
    assert count_rectangle(rect) == int(inside.sum())


def test_truncation_is_reported():
    with pytest.raises(TruncationExceeded):
        count_strip(Strip(50, 1), DualLattice(1, 10))
