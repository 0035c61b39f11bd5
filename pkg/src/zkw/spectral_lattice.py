"""Dual lattice Z^2/lam, Fourier coefficient fields and the ZK dispersion symbols.

A lattice point k = (a/lam, b/lam) is stored through its integer numerators,
so sums and differences of frequencies are exact.  Fields are stored densely
over the truncation box |a|, |b| <= K*lam.
"""

from dataclasses import dataclass
import json

import numpy as np

from .errors import LatticeMismatch, TruncationExceeded

SQRT2 = np.sqrt(2.0)
SQRT3 = np.sqrt(3.0)

# l = M k turns xi^3 + xi*eta^2 into (up to the factor 4*sqrt(2)) l1^3 + l2^3
SYM_MATRIX = SQRT2 * np.array([[1.0, 1.0 / SQRT3], [1.0, -1.0 / SQRT3]])
SYM_INVERSE = 2.0 ** -1.5 * np.array([[1.0, 1.0], [SQRT3, -SQRT3]])


@dataclass(frozen=True)
class DualLattice:
    lam: int = 1
    radius: int = 128

    def __post_init__(self):
        if int(self.lam) != self.lam or self.lam < 1:
            raise ValueError("lam must be a positive integer")
        if int(self.radius) != self.radius or self.radius < 1:
            raise ValueError("radius must be a positive integer")

    @property
    def half(self):
        """Largest admissible integer numerator."""
        return self.radius * self.lam

    @property
    def size(self):
        return 2 * self.half + 1

    def numerators(self):
        return np.arange(-self.half, self.half + 1)

    def coords(self):
        """Meshgrid of lattice coordinates (xi, eta), indexing 'ij'."""
        n = self.numerators() / self.lam
        return np.meshgrid(n, n, indexing="ij")

    def contains(self, a, b):
        return abs(a) <= self.half and abs(b) <= self.half


@dataclass(frozen=True)
class FreqIndex:
    a: int
    b: int
    lam: int = 1

    def _check(self, other):
        if self.lam != other.lam:
            raise LatticeMismatch("frequencies on different lattices")

    def __add__(self, other):
        self._check(other)
        return FreqIndex(self.a + other.a, self.b + other.b, self.lam)

    def __sub__(self, other):
        self._check(other)
        return FreqIndex(self.a - other.a, self.b - other.b, self.lam)

    def __neg__(self):
        return FreqIndex(-self.a, -self.b, self.lam)

    @property
    def xi(self):
        return self.a / self.lam

    @property
    def eta(self):
        return self.b / self.lam

    @property
    def coords(self):
        return (self.a / self.lam, self.b / self.lam)

    def norm(self):
        return np.hypot(self.xi, self.eta)


def _pair(k):
    if isinstance(k, FreqIndex):
        return k.xi, k.eta
    return k[0], k[1]


def dispersion_phi(k):
    """phi(xi, eta) = xi^3 + xi*eta^2; accepts a FreqIndex or a coordinate pair."""
    xi, eta = _pair(k)
    return xi ** 3 + xi * eta ** 2


def dispersion_psi_sym(l):
    """Symmetrised symbol l1^3 + l2^3."""
    l1, l2 = _pair(l)
    return l1 ** 3 + l2 ** 3


SYMBOLS = {"phi": dispersion_phi, "psi_sym": dispersion_psi_sym}


def symbol_function(tag):
    try:
        return SYMBOLS[tag]
    except KeyError:
        raise ValueError(f"unknown symbol {tag!r}") from None


def symmetrize(k):
    xi, eta = _pair(k)
    return SYM_MATRIX @ np.array([xi, eta], dtype=float)


def unsymmetrize(l):
    l1, l2 = _pair(l)
    return SYM_INVERSE @ np.array([l1, l2], dtype=float)


def shell_index(a, b, lam=1):
    """Exact dyadic shell of k = (a, b)/lam: 0 for |k| <= 1, else n with 2^(n-1) < |k| <= 2^n.

    Works on integer arrays; comparisons are done on a^2 + b^2 against lam^2 4^n.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    r2 = a * a + b * b
    l2 = np.int64(lam) * np.int64(lam)
    n = np.zeros(r2.shape, dtype=np.int64)
    # at most ~40 shells for any box we can store
    bound = l2
    active = r2 > bound
    while np.any(active):
        n[active] += 1
        bound = bound * 4
        active = r2 > bound
    return n if n.ndim else int(n)


def shell_contains(N, k):
    """Whether |k| lies in the dyadic shell of magnitude N (N = 1 is the low shell)."""
    xi, eta = _pair(k)
    r = np.hypot(xi, eta)
    if N <= 1:
        return r <= 1
    return (r > N / 2) & (r <= N)


class GridFunction:
    """Complex amplitudes on the truncation box of a DualLattice.

    ``values[i, j]`` is the amplitude at (a, b) = (i - K*lam, j - K*lam).
    """

    def __init__(self, lattice, values=None):
        self.lattice = lattice
        shape = (lattice.size, lattice.size)
        if values is None:
            values = np.zeros(shape, dtype=complex)
        else:
            values = np.asarray(values, dtype=complex)
            if values.shape != shape:
                raise ValueError(f"values must have shape {shape}")
        self.values = values

    @classmethod
    def from_modes(cls, lattice, modes):
        f = cls(lattice)
        for (a, b), amp in modes.items():
            f[a, b] = amp
        return f

    def _index(self, a, b):
        if not self.lattice.contains(a, b):
            raise TruncationExceeded(f"({a}, {b}) outside the truncation box")
        h = self.lattice.half
        return a + h, b + h

    def __getitem__(self, key):
        if isinstance(key, FreqIndex):
            if key.lam != self.lattice.lam:
                raise LatticeMismatch("frequency scale differs from lattice")
            key = (key.a, key.b)
        return self.values[self._index(*key)]

    def __setitem__(self, key, value):
        if isinstance(key, FreqIndex):
            if key.lam != self.lattice.lam:
                raise LatticeMismatch("frequency scale differs from lattice")
            key = (key.a, key.b)
        self.values[self._index(*key)] = value

    def copy(self):
        return GridFunction(self.lattice, self.values.copy())

    def support(self):
        """Integer numerators (n, 2) and amplitudes of the nonzero entries."""
        i, j = np.nonzero(self.values)
        h = self.lattice.half
        return np.stack([i - h, j - h], axis=1), self.values[i, j]

    def l2_norm(self):
        lam = self.lattice.lam
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)) / lam)

    def is_hermitian(self, tol=1e-12):
        v = self.values
        scale = max(np.max(np.abs(v)), 1.0)
        return bool(np.max(np.abs(v - np.conj(v[::-1, ::-1]))) <= tol * scale)

    def to_json(self):
        idx, amp = self.support()
        order = np.lexsort((idx[:, 1], idx[:, 0]))
        entries = [
            {"a": int(idx[o, 0]), "b": int(idx[o, 1]),
             "re": float(amp[o].real), "im": float(amp[o].imag)}
            for o in order
        ]
        return json.dumps({"lambda": self.lattice.lam, "radius": self.lattice.radius,
                           "entries": entries}, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        f = cls(DualLattice(data["lambda"], data["radius"]))
        for e in data["entries"]:
            f[e["a"], e["b"]] = complex(e["re"], e["im"])
        return f


def sobolev_norm(f, s):
    xi, eta = f.lattice.coords()
    weight = (1.0 + xi ** 2 + eta ** 2) ** s
    total = np.sum(weight * np.abs(f.values) ** 2)
    return float(np.sqrt(total)) / f.lattice.lam


def shell_map(lattice):
    n = lattice.numerators()
    a, b = np.meshgrid(n, n, indexing="ij")
    return shell_index(a, b, lattice.lam)


def littlewood_paley_project(f, n):
    if n < 0:
        raise ValueError("shell index must be nonnegative")
    mask = shell_map(f.lattice) == n
    return GridFunction(f.lattice, np.where(mask, f.values, 0))


@dataclass(frozen=True)
class ModulationRegion:
    """G_{N,<=L}: |k| in the shell of N and |tau - symbol(k)| <= L."""
    N: float
    L: float
    symbol: str = "phi"

    def contains(self, tau, k):
        psi = symbol_function(self.symbol)(k)
        return bool(shell_contains(self.N, k)) and abs(tau - psi) <= self.L
