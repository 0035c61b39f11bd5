"""Pure numpy versions of the compiled kernels (same signatures)."""

import numpy as np


def _ramp2(x):
    return 0.5 * np.square(np.maximum(x, 0.0))


def _cumulative(t, a, b):
    return _ramp2(t + a) - _ramp2(t + b) - _ramp2(t - b) + _ramp2(t - a)


def overlap_kernel_array(phi, l1, l2, l3):
    phi = np.asarray(phi, dtype=float)
    a = l1 + l2
    b = abs(l1 - l2)
    v = _cumulative(-phi + l3, a, b) - _cumulative(-phi - l3, a, b)
    return np.maximum(v, 0.0)


def trilinear_sum(idx1, val1, sym1, idx2, val2, sym2, g3, sym3, half,
                  l1, l2, l3, lam, c31, c11, c3s):
    size = g3.shape[0]
    weighted = c31 != 0.0 or c11 != 0.0 or c3s != 0.0
    total = 0.0
    for i in range(idx1.shape[0]):
        a3 = idx1[i, 0] + idx2[:, 0] + half
        b3 = idx1[i, 1] + idx2[:, 1] + half
        ok = (a3 >= 0) & (b3 >= 0) & (a3 < size) & (b3 < size)
        if not np.any(ok):
            continue
        a3, b3 = a3[ok], b3[ok]
        v = g3[a3, b3]
        phi = sym1[i] + sym2[ok] - sym3[a3, b3]
        v = v * val1[i] * val2[ok] * overlap_kernel_array(phi, l1, l2, l3)
        if weighted:
            w = (c31 * np.abs((a3 - half) / lam) + c11 * abs(idx1[i, 0] / lam)
                 + c3s * ((a3 - half) + (b3 - half)) / lam)
            v = v * w
        total += float(np.sum(v))
    return total


def count_slabs(a_min, a_max, lam, yscale, rows, shift, halfw, guard):
    """Count (a, b) with |rows[i] . (a/lam, yscale b/lam) + shift[i]| <= halfw[i] + guard."""
    a = np.arange(a_min, a_max + 1)
    x = a / lam
    lo = np.full(a.shape, -1e300)
    hi = np.full(a.shape, 1e300)
    empty = np.zeros(a.shape, dtype=bool)
    for i in range(rows.shape[0]):
        cb = rows[i, 1] * yscale / lam
        const = rows[i, 0] * x + shift[i]
        h = halfw[i] + guard
        if abs(cb) < 1e-300:
            empty |= np.abs(const) > h
            continue
        t0 = (-h - const) / cb
        t1 = (h - const) / cb
        lo = np.maximum(lo, np.minimum(t0, t1))
        hi = np.minimum(hi, np.maximum(t0, t1))
    n = np.floor(hi) - np.ceil(lo) + 1
    n = np.where(empty | (lo > hi), 0, np.maximum(n, 0))
    return int(np.sum(n))


def pair_minima(g1, g2):
    """min |Phi| and min |F| over all point pairs g1[r, i] x g2[r, j], per row r."""
    x1, y1 = g1[:, :, None, 0], g1[:, :, None, 1]
    x2, y2 = g2[:, None, :, 0], g2[:, None, :, 1]
    phi = np.abs(x1 * x2 * (x1 + x2) + y1 * y2 * (y1 + y2)).min(axis=(1, 2))
    f = np.abs(x1 * y2 + x2 * y1 + 2 * (x1 * y1 + x2 * y2)).min(axis=(1, 2))
    return phi, f
