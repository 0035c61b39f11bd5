"""Lattice points in slanted strips and rectangles, and the sqrt(3) Liouville certificate.

Every region here is an intersection of two slabs |r . x + s| <= h, so counting
reduces to summing integer interval lengths column by column (kernels.count_slabs).
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import TruncationExceeded
from .spectral_lattice import SQRT3, SYM_INVERSE, SYM_MATRIX

GUARD = 1e-9
V1 = np.array([1.0, SQRT3])
V2 = np.array([-1.0, SQRT3])


@dataclass(frozen=True)
class Strip:
    """{c1 v1 + c2 v2 - alpha : |c1| <= ell, |c2| <= w}."""
    ell: float
    w: float
    alpha: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.ell <= 0 or self.w <= 0:
            raise ValueError("strip half-widths must be positive")

    def rows(self):
        ax, ay = self.alpha
        rows = np.array([[0.5, 0.5 / SQRT3], [-0.5, 0.5 / SQRT3]])
        shift = rows @ np.array([ax, ay], dtype=float)
        return rows, shift, np.array([self.ell, self.w], dtype=float)

    def coefficients(self, x, y):
        """(c1, c2) for the point (x, y)."""
        ax, ay = self.alpha
        u, v = x + ax, y + ay
        return (u + v / SQRT3) / 2, (v / SQRT3 - u) / 2

    def contains(self, x, y):
        c1, c2 = self.coefficients(x, y)
        return (np.abs(c1) <= self.ell + GUARD) & (np.abs(c2) <= self.w + GUARD)

    def bounding_box(self):
        ax, ay = self.alpha
        s = self.ell + self.w
        return (-ax - s, -ax + s), (-ay - SQRT3 * s, -ay + SQRT3 * s)


@dataclass(frozen=True)
class AxisRectangle:
    """{|l1| <= c1, |l2| <= c2} - alpha over the lattice Z^2/lam ("Z") or M(Z^2/lam) ("M")."""
    c1: float
    c2: float
    alpha: tuple = (0.0, 0.0)
    lattice: str = "Z"
    lam: int = 1

    def __post_init__(self):
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("rectangle half-widths must be positive")
        if self.lattice not in ("Z", "M"):
            raise ValueError("lattice must be 'Z' or 'M'")

    def _matrix(self):
        return SYM_MATRIX if self.lattice == "M" else np.eye(2)

    def rows(self):
        return (self._matrix().copy(), np.array(self.alpha, dtype=float),
                np.array([self.c1, self.c2], dtype=float))

    def contains_pullback(self, x, y):
        """Membership of M k (or k) for lattice coordinates k = (x, y)."""
        m = self._matrix()
        l1 = m[0, 0] * x + m[0, 1] * y + self.alpha[0]
        l2 = m[1, 0] * x + m[1, 1] * y + self.alpha[1]
        return (np.abs(l1) <= self.c1 + GUARD) & (np.abs(l2) <= self.c2 + GUARD)

    def bounding_box(self):
        inv = SYM_INVERSE if self.lattice == "M" else np.eye(2)
        corners = np.array([[sx * self.c1 - self.alpha[0], sy * self.c2 - self.alpha[1]]
                            for sx in (-1, 1) for sy in (-1, 1)])
        k = corners @ inv.T
        return (k[:, 0].min(), k[:, 0].max()), (k[:, 1].min(), k[:, 1].max())


def _column_range(box, lam, half, yscale=1.0):
    (x0, x1), (y0, y1) = box
    a_min = int(np.floor(x0 * lam)) - 1
    a_max = int(np.ceil(x1 * lam)) + 1
    b_min = int(np.floor(y0 * lam / yscale)) - 1
    b_max = int(np.ceil(y1 * lam / yscale)) + 1
    if half is not None and (min(a_min, b_min) < -half or max(a_max, b_max) > half):
        raise TruncationExceeded("region leaves the search box")
    return a_min, a_max


def _count(rows, shift, halfw, box, lam, half, yscale=1.0):
    a_min, a_max = _column_range(box, lam, half, yscale)
    return int(kernels.count_slabs(a_min, a_max, float(lam), float(yscale),
                                   np.ascontiguousarray(rows, dtype=float),
                                   np.ascontiguousarray(shift, dtype=float),
                                   np.ascontiguousarray(halfw, dtype=float), GUARD))


def count_strip(strip, lattice):
    rows, shift, halfw = strip.rows()
    return _count(rows, shift, halfw, strip.bounding_box(), lattice.lam, lattice.half)


def count_strip_irrational_torus(strip, lam, radius=None):
    """Count points of Z/lam x sqrt(3)Z/lam in the strip."""
    rows, shift, halfw = strip.rows()
    half = None if radius is None else radius * lam
    return _count(rows, shift, halfw, strip.bounding_box(), lam, half, yscale=SQRT3)


def count_rectangle(rect, radius=None):
    rows, shift, halfw = rect.rows()
    half = None if radius is None else radius * rect.lam
    return _count(rows, shift, halfw, rect.bounding_box(), rect.lam, half)


def liouville_certificate(q, p):
    if q < 1:
        raise ValueError("q must be positive")
    return abs(SQRT3 - p / q) * q * q


def liouville_floor(q_max):
    """min over 1 <= q <= q_max of the certificate at the nearest p."""
    q = np.arange(1, q_max + 1, dtype=float)
    p = np.rint(SQRT3 * q)
    vals = np.abs(SQRT3 - p / q) * q * q
    i = int(np.argmin(vals))
    return float(vals[i]), int(q[i]), int(p[i])
