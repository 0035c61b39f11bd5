"""Resonance and transversality polynomials, surface normals, normal determinants.

All polynomial helpers take two frequency pairs k1, k2 (scalars or arrays in
each coordinate) with the convention k3 = k1 + k2.
"""

from dataclasses import dataclass

import numpy as np

from .spectral_lattice import symbol_function


@dataclass(frozen=True)
class FreqPair:
    k1: tuple
    k2: tuple

    @property
    def k3(self):
        return (self.k1[0] + self.k2[0], self.k1[1] + self.k2[1])


def _unpack(p, k2):
    if k2 is None:
        return p.k1, p.k2
    return p, k2


def resonance_Phi(p, k2=None):
    (x1, y1), (x2, y2) = _unpack(p, k2)
    return x1 * x2 * (x1 + x2) + y1 * y2 * (y1 + y2)


def transversality_F(p, k2=None):
    (x1, y1), (x2, y2) = _unpack(p, k2)
    return x1 * y2 + x2 * y1 + 2 * (x1 * y1 + x2 * y2)


def resonance_Phi_hat(p, k2=None):
    """phi(k1 + k2) - phi(k1) - phi(k2) written out as a polynomial."""
    (x1, y1), (x2, y2) = _unpack(p, k2)
    return (3 * x1 * x2 * (x1 + x2) + x1 * y2 * (2 * y1 + y2)
            + x2 * y1 * (y1 + 2 * y2))


def nlw_transversality(p, k2=None):
    """(xi1 eta2 - xi2 eta1)(3(xi1^2 + xi1 xi2 + xi2^2) - (eta1^2 + eta1 eta2 + eta2^2))."""
    (x1, y1), (x2, y2) = _unpack(p, k2)
    return ((x1 * y2 - x2 * y1)
            * (3 * (x1 * x1 + x1 * x2 + x2 * x2) - (y1 * y1 + y1 * y2 + y2 * y2)))


def symbol_gradient(tag, xi, eta):
    if tag == "phi":
        return 3 * xi ** 2 + eta ** 2, 2 * xi * eta
    if tag == "psi_sym":
        return 3 * xi ** 2, 3 * eta ** 2
    raise ValueError(f"unknown symbol {tag!r}")


@dataclass(frozen=True)
class SurfacePoint:
    base: tuple
    symbol: str = "phi"

    @property
    def lift(self):
        return symbol_function(self.symbol)(self.base)

    @property
    def point(self):
        return np.array([self.lift, self.base[0], self.base[1]], dtype=float)


def surface_normal(pt, symbol=None):
    """Unit normal (-1, d_xi psi, d_eta psi)/norm at a point of the graph tau = psi(xi, eta).

    ``pt`` may be a SurfacePoint, or a base pair (possibly arrays) with ``symbol``.
    Returns an array whose leading axis has length 3.
    """
    if isinstance(pt, SurfacePoint):
        symbol, (xi, eta) = pt.symbol, pt.base
    else:
        xi, eta = pt
        symbol = symbol or "phi"
    gx, gy = symbol_gradient(symbol, np.asarray(xi, dtype=float), np.asarray(eta, dtype=float))
    v = np.stack(np.broadcast_arrays(-np.ones_like(gx), gx, gy))
    return v / np.sqrt(np.sum(v * v, axis=0))


def transversality_det(p1, p2, p3, symbol=None):
    """det(n1, n2, n3) with the normals as columns; broadcasts over array bases."""
    n1 = surface_normal(p1, symbol)
    n2 = surface_normal(p2, symbol)
    n3 = surface_normal(p3, symbol)
    return normals_det(n1, n2, n3)


def normals_det(n1, n2, n3):
    # triple product n1 . (n2 x n3); leading axis holds the components
    cx = n2[1] * n3[2] - n2[2] * n3[1]
    cy = n2[2] * n3[0] - n2[0] * n3[2]
    cz = n2[0] * n3[1] - n2[1] * n3[0]
    return n1[0] * cx + n1[1] * cy + n1[2] * cz
