# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: trilinear lattice sums, slab lattice counting and tile-pair minima."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, floor, ceil

cnp.import_array()


cdef inline double _ramp2(double x) nogil:
    return 0.5 * x * x if x > 0.0 else 0.0


cdef inline double _cumulative(double t, double a, double b) nogil:
    return _ramp2(t + a) - _ramp2(t + b) - _ramp2(t - b) + _ramp2(t - a)


cdef inline double _overlap(double phi, double l1, double l2, double l3) nogil:
    cdef double a = l1 + l2
    cdef double b = fabs(l1 - l2)
    cdef double v = _cumulative(-phi + l3, a, b) - _cumulative(-phi - l3, a, b)
    return v if v > 0.0 else 0.0


def overlap_kernel_array(double[::1] phi, double l1, double l2, double l3):
    cdef Py_ssize_t i, n = phi.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = _overlap(phi[i], l1, l2, l3)
    return out


def trilinear_sum(long long[:, ::1] idx1, double[::1] val1, double[::1] sym1,
                  long long[:, ::1] idx2, double[::1] val2, double[::1] sym2,
                  double[:, ::1] g3, double[:, ::1] sym3, long long half,
                  double l1, double l2, double l3, double lam,
                  double c31, double c11, double c3s):
    cdef Py_ssize_t i, j, n1 = idx1.shape[0], n2 = idx2.shape[0]
    cdef long long a3, b3, size = g3.shape[0]
    cdef double total = 0.0, v, w, phi
    cdef bint weighted = (c31 != 0.0) or (c11 != 0.0) or (c3s != 0.0)
    with nogil:
        for i in range(n1):
            for j in range(n2):
                a3 = idx1[i, 0] + idx2[j, 0] + half
                b3 = idx1[i, 1] + idx2[j, 1] + half
                if a3 < 0 or b3 < 0 or a3 >= size or b3 >= size:
                    continue
                v = g3[a3, b3]
                if v == 0.0:
                    continue
                phi = sym1[i] + sym2[j] - sym3[a3, b3]
                v = v * val1[i] * val2[j] * _overlap(phi, l1, l2, l3)
                if weighted:
                    w = (c31 * fabs((a3 - half) / lam) + c11 * fabs(idx1[i, 0] / lam)
                         + c3s * ((a3 - half) + (b3 - half)) / lam)
                    v = v * w
                total += v
    return total


def count_slabs(long long a_min, long long a_max, double lam, double yscale,
                double[:, ::1] rows, double[::1] shift, double[::1] halfw, double guard):
    """Count (a, b) with |rows[i] . (a/lam, yscale b/lam) + shift[i]| <= halfw[i] + guard."""
    cdef long long a, total = 0, lo_i, hi_i
    cdef double x, lo, hi, cb, const, t0, t1, h
    cdef Py_ssize_t i, m = rows.shape[0]
    cdef bint empty
    with nogil:
        for a in range(a_min, a_max + 1):
            x = a / lam
            lo = -1e300
            hi = 1e300
            empty = False
            for i in range(m):
                cb = rows[i, 1] * yscale / lam
                const = rows[i, 0] * x + shift[i]
                h = halfw[i] + guard
                if fabs(cb) < 1e-300:
                    if fabs(const) > h:
                        empty = True
                        break
                    continue
                t0 = (-h - const) / cb
                t1 = (h - const) / cb
                if t0 > t1:
                    t0, t1 = t1, t0
                if t0 > lo:
                    lo = t0
                if t1 < hi:
                    hi = t1
            if empty or lo > hi:
                continue
            lo_i = <long long> ceil(lo)
            hi_i = <long long> floor(hi)
            if hi_i >= lo_i:
                total += hi_i - lo_i + 1
    return total


def pair_minima(double[:, :, ::1] g1, double[:, :, ::1] g2):
    """min |Phi| and min |F| over all point pairs g1[r, i] x g2[r, j], per row r."""
    cdef Py_ssize_t r, i, j, n = g1.shape[0], p1 = g1.shape[1], p2 = g2.shape[1]
    cdef double x1, y1, x2, y2, phi, f, mphi, mf
    out_phi = np.empty(n, dtype=np.float64)
    out_f = np.empty(n, dtype=np.float64)
    cdef double[::1] op = out_phi
    cdef double[::1] of = out_f
    with nogil:
        for r in range(n):
            mphi = 1e300
            mf = 1e300
            for i in range(p1):
                x1 = g1[r, i, 0]
                y1 = g1[r, i, 1]
                for j in range(p2):
                    x2 = g2[r, j, 0]
                    y2 = g2[r, j, 1]
                    phi = fabs(x1 * x2 * (x1 + x2) + y1 * y2 * (y1 + y2))
                    f = fabs(x1 * y2 + x2 * y1 + 2.0 * (x1 * y1 + x2 * y2))
                    if phi < mphi:
                        mphi = phi
                    if f < mf:
                        mf = f
            op[r] = mphi
            of[r] = mf
    return out_phi, out_f
