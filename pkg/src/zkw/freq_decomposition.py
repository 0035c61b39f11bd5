"""Whitney-type decompositions of R^2 x R^2 and almost-orthogonality counts.

Tiles are unions of parallelograms.  A pair of tiles is certified for a
polynomial G (the resonance Phi or the transversality F) by evaluating |G| on
a grid of each tile and subtracting a Lipschitz slack:
    min |G| >= min_grid |G| - Lip(G) * sqrt(h1^2 + h2^2),
with h_i the covering radius of the grid on tile i and Lip(Phi) <= 6 R^2,
Lip(F) <= 6 R over the bounding box of radius R.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ScaleMismatch

KAPPA = (np.sqrt(2) + 1) ** (2 / 3)
K_SLOPES = {
    0: (np.sqrt(2) - 1) ** (4 / 3),
    1: KAPPA * (np.sqrt(2) + np.sqrt(3)),
    2: -KAPPA * (np.sqrt(3) - np.sqrt(2)),
}
K_WIDTH = 2.0 ** -20

CLASS_NAMES = {0: "unresolved", 1: "Z1", 2: "Z2", 3: "Z1Z2"}


# --- elementary regions -----------------------------------------------------

@dataclass(frozen=True)
class SquareTile:
    A: float
    m: tuple
    N1: float

    @property
    def side(self):
        return self.N1 / self.A

    def contains(self, x, y):
        s = self.side
        return ((x >= self.m[0] * s) & (x < (self.m[0] + 1) * s)
                & (y >= self.m[1] * s) & (y < (self.m[1] + 1) * s))


def locate_square_tile(x, y, A, N1):
    s = N1 / A
    return np.floor(np.asarray(x) / s).astype(np.int64), np.floor(np.asarray(y) / s).astype(np.int64)


@dataclass(frozen=True)
class AngularSector:
    A: int
    j: int

    def intervals(self):
        lo = np.pi * (self.j - 2) / self.A
        hi = np.pi * (self.j + 2) / self.A
        return [(lo, hi), (lo - np.pi, hi - np.pi)]


def sector_membership(k, sector):
    x, y = np.asarray(k[0], dtype=float), np.asarray(k[1], dtype=float)
    theta = np.arctan2(y, x)
    inside = (x == 0) & (y == 0)
    for lo, hi in sector.intervals():
        inside = inside | (np.mod(theta - lo, 2 * np.pi) <= hi - lo + 1e-15)
    return inside


@dataclass(frozen=True)
class KRegion:
    index: int
    N1: float
    primed: bool = False

    @property
    def slope(self):
        return K_SLOPES[self.index]


def kregion_membership(k, region):
    x, y = np.asarray(k[0], dtype=float), np.asarray(k[1], dtype=float)
    if region.primed:
        x, y = y, x
    return np.abs(y - region.slope * x) <= K_WIDTH * region.N1


def annular_sequence(A, N1, n_max):
    """a_{A,1..n_max}: a_1 = 0, a_{n+1} = a_n + N1/sqrt((n+1)A)."""
    steps = N1 / np.sqrt(np.arange(2, n_max + 1) * A)
    return np.concatenate([[0.0], np.cumsum(steps)])


def _annular_uv(x, y, i):
    slope = K_SLOPES[i]
    return y - slope * x, y - KAPPA * x


def annular_tile_locate(k, A, i, N1):
    """(n, z) with a_n <= |u| < a_{n+1} and z A^-1 N1 <= v < (z+1) A^-1 N1."""
    u, v = _annular_uv(np.asarray(k[0], dtype=float), np.asarray(k[1], dtype=float), i)
    au = np.abs(u)
    # a_n ~ 2 N1 sqrt(n/A); size the table from the largest |u|
    n_max = int(np.ceil(A * (np.max(au) / N1 + 1) ** 2)) + 4
    seq = annular_sequence(A, N1, n_max)
    n = np.searchsorted(seq, au, side="right")
    z = np.floor(v * A / N1).astype(np.int64)
    return n.astype(np.int64), z


def flat_tile_sides(d, N1, N3):
    return N3 ** 3 / (d * N1 ** 2), N3 / d


def flat_tile_locate(k, d, N1, N3):
    sx, sy = flat_tile_sides(d, N1, N3)
    return (np.floor(np.asarray(k[0], dtype=float) / sx).astype(np.int64),
            np.floor(np.asarray(k[1], dtype=float) / sy).astype(np.int64))


# --- tile families as parallelogram unions ----------------------------------

class SquareFamily:
    """Square tiles T_m^A of side N1/A."""
    nested = True

    def __init__(self, N1):
        self.N1 = N1

    def side(self, A):
        return self.N1 / A, self.N1 / A

    def locate(self, x, y, A):
        return locate_square_tile(x, y, A, self.N1)

    def pieces(self, idx, A):
        sx, sy = self.side(A)
        p0 = np.stack([idx[0] * sx, idx[1] * sy], axis=-1).astype(float)
        e1 = np.broadcast_to([sx, 0.0], p0.shape)
        e2 = np.broadcast_to([0.0, sy], p0.shape)
        return [(p0, e1, e2)]


class FlatFamily(SquareFamily):
    """Rectangles R_m^d with sides d^-1 N1^-2 N3^3 (xi) and d^-1 N3 (eta); scale is d."""

    def __init__(self, N1, N3):
        self.N1 = N1
        self.N3 = N3

    def side(self, d):
        return flat_tile_sides(d, self.N1, self.N3)

    def locate(self, x, y, d):
        return flat_tile_locate((x, y), d, self.N1, self.N3)


class AnnularFamily:
    """R_{A,m,i}: two strip conditions in (u, v) = (eta - s_i xi, eta - kappa xi)."""
    nested = False

    def __init__(self, N1, i):
        self.N1 = N1
        self.i = i
        self._seq = {}

    def seq(self, A, n):
        cached = self._seq.get(A)
        need = int(np.max(n)) + 2 if np.size(n) else 2
        if cached is None or len(cached) < need:
            cached = annular_sequence(A, self.N1, max(need, 64))
            self._seq[A] = cached
        return cached

    def locate(self, x, y, A):
        return annular_tile_locate((x, y), A, self.i, self.N1)

    def _xy(self, u, v):
        s = K_SLOPES[self.i]
        x = (u - v) / (KAPPA - s)
        return np.stack([x, v + KAPPA * x], axis=-1)

    def pieces(self, idx, A):
        n, z = idx
        seq = self.seq(A, n)
        lo, hi = seq[n - 1], seq[n]
        v0 = z * self.N1 / A
        dv = self.N1 / A
        out = []
        for sign in (1.0, -1.0):
            u0 = np.where(sign > 0, lo, -hi)
            u1 = np.where(sign > 0, hi, -lo)
            p0 = self._xy(u0, v0)
            e1 = self._xy(u1, v0) - p0
            e2 = self._xy(u0, v0 + dv) - p0
            out.append((p0, e1, e2))
        # for n = 1 the two halves together form the single band |u| < a_2
        return out


# --- certification ----------------------------------------------------------

def _grid(pieces, q):
    """Grid points (n, P, 2) over all pieces and the covering radius (n,)."""
    t = np.linspace(0.0, 1.0, q + 1)
    s1, s2 = np.meshgrid(t, t, indexing="ij")
    s1, s2 = s1.ravel(), s2.ravel()
    pts, rad = [], []
    for p0, e1, e2 in pieces:
        pts.append(p0[:, None, :] + s1[None, :, None] * e1[:, None, :]
                   + s2[None, :, None] * e2[:, None, :])
        r = np.maximum(np.linalg.norm(e1 + e2, axis=-1), np.linalg.norm(e1 - e2, axis=-1)) / (2 * q)
        rad.append(r)
    return np.concatenate(pts, axis=1), np.max(np.stack(rad), axis=0)


def _vertices(pieces):
    vs = []
    for p0, e1, e2 in pieces:
        vs += [p0, p0 + e1, p0 + e2, p0 + e1 + e2]
    return np.stack(vs, axis=1)


def certify_pairs(pieces1, pieces2, thr_phi, thr_F, q=4, chunk=2048):
    """Lower bounds of |Phi| and |F| over each tile product and the class code.

    Class code: bit 0 set if min |Phi| >= thr_phi certified, bit 1 for |F| >= thr_F.
    """
    n = pieces1[0][0].shape[0]
    lb_phi = np.empty(n)
    lb_F = np.empty(n)
    for start in range(0, n, chunk):
        sl = slice(start, min(n, start + chunk))
        p1 = [(a[sl], b[sl], c[sl]) for a, b, c in pieces1]
        p2 = [(a[sl], b[sl], c[sl]) for a, b, c in pieces2]
        g1, h1 = _grid(p1, q)
        g2, h2 = _grid(p2, q)
        R = np.maximum(np.abs(_vertices(p1)).max(axis=(1, 2)), np.abs(_vertices(p2)).max(axis=(1, 2)))
        slack = np.sqrt(h1 ** 2 + h2 ** 2)
        m_phi, m_F = kernels.pair_minima(np.ascontiguousarray(g1), np.ascontiguousarray(g2))
        lb_phi[sl] = m_phi - 6 * R ** 2 * slack
        lb_F[sl] = m_F - 6 * R * slack
    code = (lb_phi >= thr_phi).astype(np.int64) + 2 * (lb_F >= thr_F).astype(np.int64)
    return code, lb_phi, lb_F


def classify_tile_pair(t1, t2, N1, q=4):
    """Certified class of a pair of SquareTiles: 'Z1', 'Z2', 'Z1Z2' or 'unresolved'."""
    if t1.A != t2.A:
        raise ScaleMismatch("tiles at different scales")
    fam = SquareFamily(N1)
    i1 = (np.array([t1.m[0]]), np.array([t1.m[1]]))
    i2 = (np.array([t2.m[0]]), np.array([t2.m[1]]))
    code, _, _ = certify_pairs(fam.pieces(i1, t1.A), fam.pieces(i2, t1.A),
                               N1 ** 3 / t1.A, N1 ** 2 / t1.A, q)
    return CLASS_NAMES[int(code[0])]


# --- regions ----------------------------------------------------------------

def _sin_angle(x1, y1, x2, y2):
    cross = x1 * y2 - y1 * x2
    den = np.hypot(x1, y1) * np.hypot(x2, y2)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, np.abs(cross) / den, 0.0)


def _in_shell(x, y, N):
    r = np.hypot(x, y)
    return (r > N / 2) & (r <= N)


@dataclass
class TransverseRegion:
    """|l1|, |l2| in the shell of N1 and |sin angle(l1, l2)| >= sin_min."""
    N1: float
    sin_min: float = 0.25

    def box(self):
        return (-self.N1, self.N1)

    def __call__(self, x1, y1, x2, y2):
        return (_in_shell(x1, y1, self.N1) & _in_shell(x2, y2, self.N1)
                & (_sin_angle(x1, y1, x2, y2) >= self.sin_min))


@dataclass
class EmptyRegion:
    N1: float

    def box(self):
        return (0.0, 0.0)

    def __call__(self, x1, y1, x2, y2):
        return np.zeros(np.broadcast(x1, x2).shape, dtype=bool)


@dataclass
class FlatRegion:
    """High-high-low interactions with xi1 + xi2 small, inside a pair of angular sectors."""
    N1: float
    N3: float
    A0: int = 8
    j1: int = 2
    j2: int = 2
    xi_factor: float = 1.0

    def box(self):
        return (-self.N1, self.N1)

    def __call__(self, x1, y1, x2, y2):
        s1 = AngularSector(self.A0, self.j1)
        s2 = AngularSector(self.A0, self.j2)
        return (_in_shell(x1, y1, self.N1) & _in_shell(x2, y2, self.N1)
                & _in_shell(x1 + x2, y1 + y2, self.N3)
                & (np.abs(x1 + x2) <= self.xi_factor * self.N3 ** 3 / self.N1 ** 2)
                & sector_membership((x1, y1), s1) & sector_membership((x2, y2), s2))


# --- nested refinement (square and flat tiles) ------------------------------

def _tile_samples(fam, idx, A, q=2):
    pts, _ = _grid(fam.pieces(idx, A), q)
    return pts


def _region_hits(fam, region, i1, i2, A, q=2):
    """Whether some sample pair of each tile product lies in the region."""
    n = len(i1[0])
    out = np.zeros(n, dtype=bool)
    for start in range(0, n, 4096):
        sl = slice(start, min(n, start + 4096))
        p1 = _tile_samples(fam, (i1[0][sl], i1[1][sl]), A, q)
        p2 = _tile_samples(fam, (i2[0][sl], i2[1][sl]), A, q)
        hit = region(p1[:, :, None, 0], p1[:, :, None, 1], p2[:, None, :, 0], p2[:, None, :, 1])
        out[sl] = hit.any(axis=(1, 2))
    return out


def _initial_tiles(fam, region, A):
    lo, hi = region.box()
    sx, sy = fam.side(A)
    a = np.arange(int(np.floor(lo / sx)) - 1, int(np.ceil(hi / sx)) + 1)
    b = np.arange(int(np.floor(lo / sy)) - 1, int(np.ceil(hi / sy)) + 1)
    ga, gb = np.meshgrid(a, b, indexing="ij")
    return ga.ravel(), gb.ravel()


def _thresholds(family, A):
    if isinstance(family, FlatFamily):
        return family.N3 ** 3 / A, family.N1 * family.N3 / A
    return family.N1 ** 3 / A, family.N1 ** 2 / A


@dataclass
class Cover:
    """Flat record of a cover: one row per tile pair."""
    A: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    cls: np.ndarray
    N1: float
    floor: float
    top: float

    def __len__(self):
        return len(self.A)

    def rows(self):
        for A, m1, m2, c in zip(self.A, self.m1, self.m2, self.cls):
            yield (float(A), int(m1[0]), int(m1[1]), int(m2[0]), int(m2[1]), CLASS_NAMES[int(c)])


def whitney_cover(N1, A_max, region, A_floor=8, family=None, q=4):
    """Refine tile pairs from A_floor until certified; unresolved pairs at A_max stay as residual.

    Each emitted row is a tile pair with the scale at which it was first
    certified (its Q_A label) or, for class 'unresolved', the terminal residual.
    """
    if A_max > N1 and family is None:
        raise ValueError("A_max must not exceed N1")
    fam = family or SquareFamily(N1)
    t = _initial_tiles(fam, region, A_floor)
    # candidate pairs: all tile pairs whose product meets the region
    n = len(t[0])
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    i1 = (t[0][ii], t[1][ii])
    i2 = (t[0][jj], t[1][jj])
    keep = _region_hits(fam, region, i1, i2, A_floor)
    i1 = (i1[0][keep], i1[1][keep])
    i2 = (i2[0][keep], i2[1][keep])
    A = A_floor
    out_A, out_m1, out_m2, out_c = [], [], [], []
    while True:
        thr_phi, thr_F = _thresholds(fam, A)
        code, _, _ = certify_pairs(fam.pieces(i1, A), fam.pieces(i2, A), thr_phi, thr_F, q)
        done = code > 0
        last = A >= A_max
        emit = done | last
        out_A.append(np.full(int(emit.sum()), float(A)))
        out_m1.append(np.stack([i1[0][emit], i1[1][emit]], axis=1))
        out_m2.append(np.stack([i2[0][emit], i2[1][emit]], axis=1))
        out_c.append(code[emit])
        if last:
            break
        r1 = (i1[0][~done], i1[1][~done])
        r2 = (i2[0][~done], i2[1][~done])
        # 2x2 children per tile, 16 child pairs per parent pair
        ch = np.array([(a, b) for a in (0, 1) for b in (0, 1)])
        shape = (len(r1[0]), 4, 4)
        c1a = np.broadcast_to(2 * r1[0][:, None, None] + ch[None, :, None, 0], shape).ravel()
        c1b = np.broadcast_to(2 * r1[1][:, None, None] + ch[None, :, None, 1], shape).ravel()
        c2a = np.broadcast_to(2 * r2[0][:, None, None] + ch[None, None, :, 0], shape).ravel()
        c2b = np.broadcast_to(2 * r2[1][:, None, None] + ch[None, None, :, 1], shape).ravel()
        A = 2 * A
        i1, i2 = (c1a, c1b), (c2a, c2b)
        keep = _region_hits(fam, region, i1, i2, A)
        i1 = (i1[0][keep], i1[1][keep])
        i2 = (i2[0][keep], i2[1][keep])
    return Cover(np.concatenate(out_A), np.concatenate(out_m1).reshape(-1, 2),
                 np.concatenate(out_m2).reshape(-1, 2), np.concatenate(out_c),
                 N1, A_floor, A_max)


def locate_in_cover(cover, family, x1, y1, x2, y2):
    """For sample point pairs, the number of cover rows whose tile product contains them."""
    keys = {}
    for r, (A, m1, m2) in enumerate(zip(cover.A, cover.m1, cover.m2)):
        keys[(float(A), int(m1[0]), int(m1[1]), int(m2[0]), int(m2[1]))] = r
    hits = np.zeros(np.shape(x1), dtype=np.int64)
    for A in np.unique(cover.A):
        a1 = family.locate(x1, y1, A)
        a2 = family.locate(x2, y2, A)
        for i in range(len(hits)):
            key = (float(A), int(a1[0][i]), int(a1[1][i]), int(a2[0][i]), int(a2[1][i]))
            hits[i] += key in keys
    return hits


def _max_multiplicity(first, second):
    if len(first) == 0:
        return 0
    pairs = np.unique(np.concatenate([first, second], axis=1), axis=0)
    _, counts = np.unique(pairs[:, :first.shape[1]], axis=0, return_counts=True)
    return int(counts.max())


def multiplicity_profile(cover, side=1, which="certified"):
    """max over fixed tile (side 1: first, side 2: second) of the number of partners, max over A.

    which="certified" counts the Q_A labels, "residual" the unresolved remainder.
    Returns (max, {A: max at that scale}).
    """
    sel = cover.cls > 0 if which == "certified" else cover.cls == 0
    per = {}
    for A in np.unique(cover.A[sel]):
        s = sel & (cover.A == A)
        a, b = (cover.m1[s], cover.m2[s]) if side == 1 else (cover.m2[s], cover.m1[s])
        per[float(A)] = _max_multiplicity(a, b)
    return (max(per.values()) if per else 0), per


# --- non-nested annular family (sample-based Q labels) ----------------------

def _kline_samples(index, N1, count, primed=False):
    """Points along a K-strip inside the shell of N1, on the centre line and both edges."""
    s = K_SLOPES[index]
    r = np.linspace(0.5, 1.0, count + 2)[1:-1] * N1
    pts = []
    for sign in (1.0, -1.0):
        x = sign * r / np.sqrt(1 + s * s)
        for off in (-K_WIDTH * N1, 0.0, K_WIDTH * N1):
            pts.append(np.stack([x, s * x + off], axis=1))
    p = np.concatenate(pts)
    return p[:, ::-1] if primed else p


def annular_cover(N1, i, A_values, samples=400, q=4):
    """Per scale A, the newly certified pairs (m, k) of annular x square tiles on K_i x K_0.

    A pair is new at A if it is certified and some sample point of its product
    is not covered by a pair certified at a coarser scale.
    """
    ann = AnnularFamily(N1, i)
    sq = SquareFamily(N1)
    p1 = _kline_samples(i, N1, samples)
    p2 = _kline_samples(0, N1, samples)
    cache = {}

    def certified(A, idx1, idx2):
        key_arr = np.stack([idx1[0], idx1[1], idx2[0], idx2[1]], axis=1)
        keys = [tuple(r) for r in key_arr]
        missing = [k for k in dict.fromkeys(keys) if (A, k) not in cache]
        if missing:
            m = np.array(missing)
            thr_phi, thr_F = N1 ** 3 / A, N1 ** 2 / A
            code, _, _ = certify_pairs(ann.pieces((m[:, 0], m[:, 1]), A),
                                       sq.pieces((m[:, 2], m[:, 3]), A), thr_phi, thr_F, q)
            for k, c in zip(missing, code):
                cache[(A, k)] = int(c)
        return np.array([cache[(A, k)] for k in keys])

    rows = []
    for A in A_values:
        t1 = np.unique(np.stack(ann.locate(p1[:, 0], p1[:, 1], A), axis=1), axis=0)
        t2 = np.unique(np.stack(sq.locate(p2[:, 0], p2[:, 1], A), axis=1), axis=0)
        ii, jj = np.meshgrid(np.arange(len(t1)), np.arange(len(t2)), indexing="ij")
        ii, jj = ii.ravel(), jj.ravel()
        i1 = (t1[ii, 0], t1[ii, 1])
        i2 = (t2[jj, 0], t2[jj, 1])
        code = certified(A, i1, i2)
        new = code > 0
        coarser = [a for a in A_values if a < A]
        if coarser and np.any(new):
            idx = np.nonzero(new)[0]
            g1, _ = _grid(ann.pieces((i1[0][idx], i1[1][idx]), A), 2)
            g2, _ = _grid(sq.pieces((i2[0][idx], i2[1][idx]), A), 2)
            P1, P2 = g1.shape[1], g2.shape[1]
            x1 = np.repeat(g1[:, :, None, 0], P2, axis=2).ravel()
            y1 = np.repeat(g1[:, :, None, 1], P2, axis=2).ravel()
            x2 = np.repeat(g2[:, None, :, 0], P1, axis=1).ravel()
            y2 = np.repeat(g2[:, None, :, 1], P1, axis=1).ravel()
            covered = np.zeros(x1.shape, dtype=bool)
            for Ac in coarser:
                covered |= certified(Ac, ann.locate(x1, y1, Ac), sq.locate(x2, y2, Ac)) > 0
            fully = covered.reshape(len(idx), -1).all(axis=1)
            new[idx[fully]] = False
        for sel, label in ((new, "new"), (code == 0, "unresolved")):
            for a, b, c, d in zip(i1[0][sel], i1[1][sel], i2[0][sel], i2[1][sel]):
                rows.append((float(A), int(a), int(b), int(c), int(d), label))
    return rows


def annular_multiplicity(rows, side=1, label="new"):
    per = {}
    for A in sorted({r[0] for r in rows}):
        sel = np.array([r[1:5] for r in rows if r[0] == A and r[5] == label]).reshape(-1, 4)
        if len(sel) == 0:
            continue
        a, b = (sel[:, :2], sel[:, 2:]) if side == 1 else (sel[:, 2:], sel[:, :2])
        per[A] = _max_multiplicity(a, b)
    return (max(per.values()) if per else 0), per


def multiplicity_summary(N1, A_floor=8, A_max=64, flat_d=(1, 2, 4), q=4):
    """Max multiplicities for the square, annular and flat families at one N1."""
    out = {}
    sq = whitney_cover(N1, A_max, TransverseRegion(N1), A_floor, q=q)
    out["square_1"] = multiplicity_profile(sq, 1)[0]
    out["square_2"] = multiplicity_profile(sq, 2)[0]
    out["square_residual"] = multiplicity_profile(sq, 1, "residual")[0]
    A_vals = [A for A in (2 ** k for k in range(3, 12)) if A_floor <= A <= A_max]
    for i in (1, 2):
        rows = annular_cover(N1, i, A_vals, q=q)
        out[f"annular{i}_1"] = annular_multiplicity(rows, 1)[0]
        out[f"annular{i}_2"] = annular_multiplicity(rows, 2)[0]
    N3 = N1 / 4
    flat = FlatFamily(N1, N3)
    fc = whitney_cover(N1, max(flat_d), FlatRegion(N1, N3), min(flat_d), family=flat, q=q)
    out["flat_1"] = multiplicity_profile(fc, 1)[0]
    out["flat_2"] = multiplicity_profile(fc, 2)[0]
    return out, {"square": sq, "flat": fc}
