"""The compiled kernels and the numpy fallback must agree on every input."""

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate
from shapely.geometry import Polygon, box

from zkw import kernels
from zkw.resonance import resonance_Phi, transversality_F
from zkw.trilinear_forms import overlap_kernel

BACKENDS = kernels.backends()
needs_c = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled kernels not built")

widths = st.floats(0.05, 5.0)
phis = st.floats(-20.0, 20.0, allow_nan=False)


def overlap_polygon(phi, l1, l2, l3):
    """Exact area by polygon clipping: the rectangle cut by the slab |s1 + s2 + phi| <= l3."""
    big = 4 * (l1 + l2 + l3 + abs(phi))
    slab = Polygon([(-big, -phi - l3 + big), (big, -phi - l3 - big),
                    (big, -phi + l3 - big), (-big, -phi + l3 + big)])
    return box(-l1, -l2, l1, l2).intersection(slab).area


@given(phis, widths, widths, widths)
def test_overlap_matches_polygon_clipping(phi, l1, l2, l3):
    assert overlap_kernel(phi, l1, l2, l3) == pytest.approx(overlap_polygon(phi, l1, l2, l3),
                                                            rel=1e-9, abs=1e-9)


@given(phis, widths, widths, widths)
def test_overlap_symmetries(phi, l1, l2, l3):
    v = overlap_kernel(phi, l1, l2, l3)
    assert v >= 0
    assert overlap_kernel(-phi, l1, l2, l3) == pytest.approx(v, rel=1e-9, abs=1e-12)
    # the set is a slice of a box in (s1, s2, s3) with s1 + s2 + s3 = -phi
    for perm in ((l2, l1, l3), (l3, l2, l1), (l1, l3, l2)):
        assert overlap_kernel(phi, *perm) == pytest.approx(v, rel=1e-9, abs=1e-12)
    lo = sorted((l1, l2, l3))
    assert v <= 4 * lo[0] * lo[1] * (1 + 1e-12)


@given(widths, widths, widths)
def test_overlap_integrates_to_box_volume(l1, l2, l3):
    s = l1 + l2 + l3
    knots = sorted({-s, -abs(l1 + l2 - l3), -abs(l1 - l2) - l3, abs(l1 - l2) - l3,
                    l3 - l1 - l2, l3 - abs(l1 - l2), abs(l1 + l2 - l3), s})
    val, _ = integrate.quad(lambda p: overlap_kernel(p, l1, l2, l3), -s, s, points=knots[1:-1],
                            epsabs=1e-12, limit=200)
    assert val == pytest.approx(8 * l1 * l2 * l3, rel=1e-8)


def test_overlap_examples():
    assert overlap_kernel(3.01, 1, 1, 1) == 0.0
    assert overlap_kernel(0.0, 1.0, 2.0, 3.5) == 8.0
    assert overlap_kernel(1.0, 1, 1, 1) == pytest.approx(2.0, abs=1e-15)
    arr = overlap_kernel(np.array([0.0, 1.0, 5.0]), 1, 1, 1)
    assert arr.shape == (3,)


@needs_c
@given(st.lists(phis, min_size=1, max_size=50), widths, widths, widths)
def test_backends_agree_overlap(phi, l1, l2, l3):
    phi = np.array(phi)
    out = [m.overlap_kernel_array(phi, l1, l2, l3) for m in BACKENDS.values()]
    assert np.allclose(out[0], out[1], rtol=1e-13, atol=1e-13)


def _trilinear_inputs(seed, half=8, n=12):
    rng = np.random.default_rng(seed)
    size = 2 * half + 1
    i1 = rng.integers(-4, 5, (n, 2)).astype(np.int64)
    i2 = rng.integers(-4, 5, (n, 2)).astype(np.int64)
    v1, v2 = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
    s1, s2 = rng.uniform(-5, 5, n), rng.uniform(-5, 5, n)
    g3 = rng.uniform(-1, 1, (size, size))
    sym3 = rng.uniform(-5, 5, (size, size))
    return i1, v1, s1, i2, v2, s2, g3, sym3, half


@needs_c
@given(st.integers(0, 10 ** 6), widths, widths, widths,
       st.sampled_from([(0.0, 0.0, 0.0), (1.0, 0.5, 0.0), (0.0, 0.0, 1.0)]))
def test_backends_agree_trilinear(seed, l1, l2, l3, weights):
    args = _trilinear_inputs(seed)
    out = [m.trilinear_sum(*args, l1, l2, l3, 2.0, *weights) for m in BACKENDS.values()]
    assert out[0] == pytest.approx(out[1], rel=1e-12, abs=1e-12)


def test_trilinear_sum_against_loop():
    i1, v1, s1, i2, v2, s2, g3, sym3, half = _trilinear_inputs(7)
    l1, l2, l3, lam = 1.0, 2.0, 1.5, 2.0
    expected = 0.0
    for a in range(len(v1)):
        for b in range(len(v2)):
            x, y = i1[a] + i2[b] + half
            phi = s1[a] + s2[b] - sym3[x, y]
            w = abs((x - half) / lam) + 0.5 * abs(i1[a, 0] / lam)
            expected += v1[a] * v2[b] * g3[x, y] * overlap_polygon(phi, l1, l2, l3) * w
    for m in BACKENDS.values():
        got = m.trilinear_sum(i1, v1, s1, i2, v2, s2, g3, sym3, half, l1, l2, l3, lam, 1.0, 0.5, 0.0)
        assert got == pytest.approx(expected, rel=1e-10)


@needs_c
@given(st.floats(0.1, 30), st.floats(0.01, 5), st.floats(-2, 2), st.floats(-2, 2),
       st.integers(1, 3), st.sampled_from([1.0, np.sqrt(3.0)]))
def test_backends_agree_count(ell, w, ax, ay, lam, yscale):
    r = np.array([[0.5, 0.5 / np.sqrt(3)], [-0.5, 0.5 / np.sqrt(3)]])
    shift = r @ np.array([ax, ay])
    halfw = np.array([ell, w])
    a0, a1 = int(-(ell + w + 3) * lam), int((ell + w + 3) * lam)
    out = [m.count_slabs(a0, a1, float(lam), float(yscale), r, shift, halfw, 1e-9)
           for m in BACKENDS.values()]
    assert out[0] == out[1]


@given(st.integers(0, 10 ** 6), st.integers(1, 30), st.integers(1, 30))
def test_pair_minima(seed, p1, p2):
    rng = np.random.default_rng(seed)
    g1 = rng.uniform(-50, 50, (7, p1, 2))
    g2 = rng.uniform(-50, 50, (7, p2, 2))
    x1, y1, x2, y2 = g1[:, :, None, 0], g1[:, :, None, 1], g2[:, None, :, 0], g2[:, None, :, 1]
    phi = np.abs(resonance_Phi((x1, y1), (x2, y2))).min(axis=(1, 2))
    F = np.abs(transversality_F((x1, y1), (x2, y2))).min(axis=(1, 2))
    for m in BACKENDS.values():
        got_phi, got_F = m.pair_minima(g1, g2)
        assert np.allclose(got_phi, phi, rtol=1e-13, atol=1e-9)
        assert np.allclose(got_F, F, rtol=1e-13, atol=1e-9)


def test_selected_backend_is_exposed():
    assert kernels.BACKEND in BACKENDS
