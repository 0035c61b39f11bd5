"""Thickened hypersurfaces in R^3: triple intersections, thickened trilinear forms,
and the ball-train example showing that transversality at convolution triples
alone does not give a Loomis-Whitney bound.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, signal

from .errors import DegenerateTransversality, GridTooCoarse
from .trilinear_forms import overlap_kernel


# --- surface catalog --------------------------------------------------------

def _affine(x, y, p):
    return p.get("a", 0.0) * x + p.get("b", 0.0) * y + p.get("c", 0.0)


def _affine_grad(x, y, p):
    return np.full_like(x, p.get("a", 0.0)), np.full_like(y, p.get("b", 0.0))


def _sine(x, y, p):
    return np.sin(np.pi * x) + p.get("c", 0.0)


def _sine_grad(x, y, p):
    return np.pi * np.cos(np.pi * x), np.zeros_like(y)


def _psi(x, y, p):
    return x ** 3 + x * y ** 2


def _psi_grad(x, y, p):
    return 3 * x ** 2 + y ** 2, 2 * x * y


def _psi_sym(x, y, p):
    return x ** 3 + y ** 3


def _psi_sym_grad(x, y, p):
    return 3 * x ** 2, 3 * y ** 2


CATALOG = {
    "affine": (_affine, _affine_grad),
    "sin": (_sine, _sine_grad),
    "psi": (_psi, _psi_grad),
    "psi_sym": (_psi_sym, _psi_sym_grad),
}


@dataclass(frozen=True)
class SurfaceSpec:
    """A plane {n.x = c} or a graph {x_axis = F(other two coords)}, thickened by eps.

    ``domain`` is a box ((x0, x1), (y0, y1), (z0, z1)); for graphs it also bounds
    the parameter coordinates.  holder_beta and holder_b are recorded only.
    """
    kind: str
    eps: float
    domain: tuple = ((-1.0, 1.0),) * 3
    normal: tuple = (0.0, 0.0, 1.0)
    c: float = 0.0
    func: str = "affine"
    params: dict = field(default_factory=dict, hash=False, compare=False)
    axis: int = 2
    holder_beta: float = 1.0
    holder_b: float = 1.0

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("thickness must be positive")
        if self.kind not in ("plane", "graph"):
            raise ValueError("kind must be 'plane' or 'graph'")
        if self.kind == "graph" and self.func not in CATALOG:
            raise ValueError(f"unknown graph function {self.func!r}")
        if self.kind == "plane":
            n = np.asarray(self.normal, dtype=float)
            if not np.isclose(np.linalg.norm(n), 1.0):
                object.__setattr__(self, "normal", tuple(n / np.linalg.norm(n)))

    def _split(self, x, y, z):
        pts = (x, y, z)
        others = [pts[i] for i in range(3) if i != self.axis]
        return pts[self.axis], others[0], others[1]

    def in_domain(self, x, y, z):
        (a0, a1), (b0, b1), (c0, c1) = self.domain
        return (x >= a0) & (x <= a1) & (y >= b0) & (y <= b1) & (z >= c0) & (z <= c1)

    def distance_like(self, x, y, z):
        """n.x - c for planes, x_axis - F for graphs (vertical distance)."""
        if self.kind == "plane":
            n = self.normal
            return n[0] * x + n[1] * y + n[2] * z - self.c
        v, s, t = self._split(x, y, z)
        return v - CATALOG[self.func][0](s, t, self.params)

    def contains(self, x, y, z, eps=None):
        e = self.eps if eps is None else eps
        return (np.abs(self.distance_like(x, y, z)) < e) & self.in_domain(x, y, z)

    def normal_at(self, x, y, z):
        """Unit normals, shape (..., 3)."""
        if self.kind == "plane":
            return np.broadcast_to(np.asarray(self.normal), np.shape(x) + (3,))
        _, s, t = self._split(x, y, z)
        gs, gt = CATALOG[self.func][1](np.asarray(s, dtype=float), np.asarray(t, dtype=float), self.params)
        comps = [-gs, -gt]
        n = [None] * 3
        n[self.axis] = np.ones_like(gs)
        rest = [i for i in range(3) if i != self.axis]
        n[rest[0]], n[rest[1]] = comps
        n = np.stack(n, axis=-1)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    def sample_points(self, rng, count):
        """Points on the (unthickened) surface inside the domain box.

        Fewer than ``count`` (possibly none) when the surface barely meets the box.
        """
        lo = np.array([d[0] for d in self.domain])
        hi = np.array([d[1] for d in self.domain])
        out = []
        for _ in range(64):
            if sum(len(o) for o in out) >= count:
                break
            p = rng.uniform(lo, hi, size=(4 * count, 3))
            if self.kind == "plane":
                n = np.asarray(self.normal)
                p = p - np.outer(p @ n - self.c, n)
            else:
                v, s, t = self._split(p[:, 0], p[:, 1], p[:, 2])
                p[:, self.axis] = CATALOG[self.func][0](s, t, self.params)
            keep = self.in_domain(p[:, 0], p[:, 1], p[:, 2])
            out.append(p[keep])
        return np.concatenate(out)[:count]

    def gradient_sup(self, rng=None, count=4096):
        if self.kind == "plane":
            return 0.0
        rng = rng or np.random.default_rng(0)
        p = self.sample_points(rng, count)
        _, s, t = self._split(p[:, 0], p[:, 1], p[:, 2])
        gs, gt = CATALOG[self.func][1](s, t, self.params)
        return float(np.max(np.hypot(gs, gt)))


def plane(normal, c, eps, domain=((-1.0, 1.0),) * 3):
    return SurfaceSpec("plane", eps, domain, tuple(float(v) for v in normal), float(c))


def graph(func, eps, axis=2, domain=((-1.0, 1.0),) * 3, **params):
    return SurfaceSpec("graph", eps, domain, func=func, params=params, axis=axis)


def transversality_constant(surfaces, samples=1000, seed=0):
    """A^-1 = min |det(n1, n2, n3)| over random triples from the full product."""
    rng = np.random.default_rng(seed)
    normals = []
    for s in surfaces:
        p = s.sample_points(rng, samples)
        if len(p) == 0:
            return np.inf   # no triples at all
        normals.append(s.normal_at(p[:, 0], p[:, 1], p[:, 2]))
    n = min(len(v) for v in normals)
    normals = [v[:n] for v in normals]
    det = np.linalg.det(np.stack(normals, axis=-1))
    return float(np.min(np.abs(det)))


# --- triple intersection volume ----------------------------------------------

@dataclass
class VolumeEstimate:
    value: float
    error: float
    det_min: float
    method: str

    @property
    def A(self):
        return 1.0 / self.det_min


def _common_box(surfaces):
    lo = np.max([[d[0] for d in s.domain] for s in surfaces], axis=0)
    hi = np.min([[d[1] for d in s.domain] for s in surfaces], axis=0)
    return lo, hi


def _grid_volume(surfaces, lo, hi, h):
    if np.any(hi <= lo):
        return 0.0
    axes = [lo[i] + h * (np.arange(int(np.ceil((hi[i] - lo[i]) / h))) + 0.5) for i in range(3)]
    axes = [a[a < hi[i]] for i, a in enumerate(axes)]
    y, z = np.meshgrid(axes[1], axes[2], indexing="ij")
    count = 0
    for x0 in axes[0]:
        x = np.full_like(y, x0)
        m = np.ones_like(y, dtype=bool)
        for s in surfaces:
            m &= s.contains(x, y, z)
        count += int(m.sum())
    return count * h ** 3


def triple_intersection_volume(s1, s2, s3, method="grid", resolution=None, samples=10 ** 7,
                               seed=0, det_samples=1000):
    """Volume of S1(eps) ∩ S2(eps) ∩ S3(eps) inside the common domain box.

    Grid: midpoint rule at step ``resolution`` (default eps/8), with the error
    taken as the difference to the step-2h result.  Monte Carlo: uniform samples
    in the box with the standard error.
    """
    surfaces = (s1, s2, s3)
    det_min = transversality_constant(surfaces, det_samples, seed)
    if det_min < 1e-6:
        raise DegenerateTransversality(f"sampled |det| = {det_min:.3g}")
    lo, hi = _common_box(surfaces)
    if method == "grid":
        h = resolution or min(s.eps for s in surfaces) / 8
        v = _grid_volume(surfaces, lo, hi, h)
        v2 = _grid_volume(surfaces, lo, hi, 2 * h)
        return VolumeEstimate(v, abs(v - v2), det_min, "grid")
    if method == "monte_carlo":
        rng = np.random.default_rng(seed)
        box = float(np.prod(np.maximum(hi - lo, 0.0)))
        hits, done, batch = 0, 0, 10 ** 6
        while done < samples:
            n = min(batch, samples - done)
            p = rng.uniform(lo, hi, size=(n, 3))
            m = np.ones(n, dtype=bool)
            for s in surfaces:
                m &= s.contains(p[:, 0], p[:, 1], p[:, 2])
            hits += int(m.sum())
            done += n
        frac = hits / samples
        return VolumeEstimate(box * frac, box * np.sqrt(frac * (1 - frac) / samples), det_min, "monte_carlo")
    raise ValueError("method must be 'grid' or 'monte_carlo'")


def plane_triple_volume(normals, eps):
    """Exact volume of three thickened planes through a common point: (2 eps)^3 / |det|."""
    return (2 * eps) ** 3 / abs(np.linalg.det(np.asarray(normals, dtype=float)))


# --- thickened trilinear form -----------------------------------------------

@dataclass
class GridSample:
    """Samples of a function at origin + h * index on a uniform 3-D grid."""
    values: np.ndarray
    origin: np.ndarray
    h: float

    def points(self):
        ax = [self.origin[i] + self.h * np.arange(self.values.shape[i]) for i in range(3)]
        return np.meshgrid(*ax, indexing="ij")

    def l2_norm(self):
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.h ** 3))


def sample_indicator(pred, lo, hi, h, supersample=1):
    """Grid sample of the indicator of a vectorized predicate pred(x, y, z) on [lo, hi].

    With supersample > 1 each node carries the average of the predicate over
    supersample^3 points of its cell, which removes the boundary bias of point
    sampling.
    """
    lo = np.asarray(lo, dtype=float)
    shape = tuple(int(np.floor((hi[i] - lo[i]) / h)) + 1 for i in range(3))
    g = GridSample(np.zeros(shape), lo, h)
    ax = [lo[i] + h * np.arange(shape[i]) for i in range(3)]
    offs = (np.arange(supersample) + 0.5) / supersample - 0.5
    y, z = np.meshgrid(ax[1], ax[2], indexing="ij")
    for i, x0 in enumerate(ax[0]):
        acc = np.zeros(y.shape)
        for ox in offs:
            for oy in offs:
                for oz in offs:
                    acc += pred(np.full_like(y, x0 + ox * h), y + oy * h, z + oz * h)
        g.values[i] = acc / supersample ** 3
    return g


@dataclass
class ThickenedReport:
    value: float
    norms: tuple
    bound: float
    ratio: float


def thickened_trilinear(f1, f2, f3, eps, A=1.0, surfaces=None):
    """Grid value of ∫ (f1*f2) f3 dx by FFT convolution and its ratio to eps^{3/2} A^{1/2} Π‖f_i‖."""
    h = f1.h
    if not (np.isclose(f2.h, h) and np.isclose(f3.h, h)):
        raise ValueError("samples must share a grid step")
    if h > eps / 4:
        raise GridTooCoarse(f"step {h:.3g} exceeds eps/4 = {eps / 4:.3g}")
    if surfaces is not None:
        for f, s in zip((f1, f2, f3), surfaces):
            x, y, z = f.points()
            nz = f.values != 0
            if np.any(nz & ~s.contains(x, y, z, eps=s.eps + 1e-12)):
                raise ValueError("sample support leaves the thickened surface")
    norms = (f1.l2_norm(), f2.l2_norm(), f3.l2_norm())
    bound = eps ** 1.5 * np.sqrt(A) * np.prod(norms)
    if not np.any(f3.values) or not np.any(f1.values) or not np.any(f2.values):
        return ThickenedReport(0.0, norms, bound, 0.0)
    conv = signal.fftconvolve(f1.values, f2.values, mode="full") * h ** 3
    shift = (f3.origin - f1.origin - f2.origin) / h
    d = np.rint(shift).astype(int)
    if np.any(np.abs(shift - d) > 1e-6):
        raise ValueError("grids are not aligned")
    sl_c, sl_f = [], []
    for i in range(3):
        a = max(0, -d[i])
        b = min(f3.values.shape[i], conv.shape[i] - d[i])
        if b <= a:
            return ThickenedReport(0.0, norms, bound, 0.0)
        sl_f.append(slice(a, b))
        sl_c.append(slice(a + d[i], b + d[i]))
    value = float(np.real(np.sum(conv[tuple(sl_c)] * f3.values[tuple(sl_f)])) * h ** 3)
    return ThickenedReport(value, norms, bound, abs(value) / bound if bound > 0 else np.inf)


def plane_box_fields(normals, eps, a, h, pad=None, supersample=4):
    """Indicators of parallelepipeds {|n_i.x| < eps, |n_j.x| < a (j != i)} on a common grid.

    Returns the three GridSamples and the exact value of ∫(f1*f2)f3 from the
    change of variables u = T x (rows of T are the normals).
    """
    T = np.asarray(normals, dtype=float)
    det = abs(np.linalg.det(T))
    halfs = [[eps if i == j else a for j in range(3)] for i in range(3)]
    fields = []
    for i in range(3):
        half = np.array(halfs[i])

        def pred(x, y, z, half=half):
            u = np.stack([T[k, 0] * x + T[k, 1] * y + T[k, 2] * z for k in range(3)])
            return np.all(np.abs(u) < half.reshape((3,) + (1,) * x.ndim), axis=0)

        corners = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]) * half
        ext = np.abs(np.linalg.solve(T, corners.T)).max() + (pad if pad is not None else 2 * h)
        lo = -np.ceil(ext / h) * h
        fields.append(sample_indicator(pred, [lo] * 3, [-lo] * 3, h, supersample))
    exact = np.prod([overlap_kernel(0.0, halfs[0][j], halfs[1][j], halfs[2][j]) for j in range(3)]) / det ** 2
    return fields, float(exact)


# --- restricted transversality counterexample --------------------------------

@dataclass(frozen=True)
class BallTrain:
    """Balls B((k, 0, 0), r) for integer |k| <= R."""
    R: int
    radius: float = 2.0 ** -10

    def __post_init__(self):
        if self.R < 0:
            raise ValueError("R must be nonnegative")
        if self.radius >= 0.5:
            raise ValueError("balls must be pairwise disjoint")

    @property
    def centers(self):
        k = np.arange(-self.R, self.R + 1, dtype=float)
        return np.stack([k, np.zeros_like(k), np.zeros_like(k)], axis=1)

    @property
    def ball_volume(self):
        return 4 / 3 * np.pi * self.radius ** 3

    def l2_norm(self):
        return float(np.sqrt((2 * self.R + 1) * self.ball_volume))

    def sum_triples(self):
        """#{(k, k'): |k|, |k'|, |k + k'| <= R} = 3R^2 + 3R + 1."""
        R = self.R
        return 3 * R * R + 3 * R + 1


def lens_volume(d, r):
    """Volume of the intersection of two balls of radius r at centre distance d."""
    d = np.asarray(d, dtype=float)
    return np.where(d < 2 * r, np.pi * (4 * r + d) * np.maximum(2 * r - d, 0) ** 2 / 12, 0.0)


def ball_triple_integral(r, method="quad", grid_step=None):
    """∫ (χ_B * χ_B) χ_B for one ball B of radius r centred at the origin."""
    if method == "quad":
        val, _ = integrate.quad(lambda s: 4 * np.pi * s * s * lens_volume(s, r), 0.0, r)
        return float(val)
    h = grid_step or r / 16
    if h > r / 4:
        raise GridTooCoarse("grid step must resolve the ball radius")
    n = int(np.ceil(r / h)) + 1
    ax = h * np.arange(-n, n + 1)
    x, y, z = np.meshgrid(ax, ax, ax, indexing="ij")
    ball = (x * x + y * y + z * z <= r * r).astype(float)
    conv = signal.fftconvolve(ball, ball, mode="same") * h ** 3
    return float(np.sum(conv * ball) * h ** 3)


def constrained_det_min(samples=1000, seed=0, eps=2.0 ** -5):
    """min |det| over triples λ1 + λ2 = λ3 with λ1 ∈ {z = c1}, λ2 ∈ {y = c2}, λ3 ∈ {z = sin(πx) + c3}."""
    rng = np.random.default_rng(seed)
    c1, c3, z2 = (rng.uniform(-eps, eps, samples) for _ in range(3))
    s = c1 + z2 - c3
    x3 = np.arcsin(s) / np.pi + rng.integers(-8, 8, samples)
    x3 = np.where(rng.random(samples) < 0.5, x3, rng.integers(-8, 8, samples) + 1 - np.arcsin(s) / np.pi)
    cp = np.pi * np.cos(np.pi * x3)
    det = np.abs(cp) / np.sqrt(1 + cp * cp)
    return float(det.min())


def unconstrained_det_min(samples=1000, seed=0):
    """min |det| over the full product; the sine graph has vertical normals at x = 1/2."""
    rng = np.random.default_rng(seed)
    x3 = rng.uniform(-4, 4, samples)
    x3[0] = 0.5
    cp = np.pi * np.cos(np.pi * x3)
    return float(np.min(np.abs(cp) / np.sqrt(1 + cp * cp)))


def restricted_transversality_counterexample(R, eps=2.0 ** -5, radius=2.0 ** -10,
                                             method="quad", grid_step=None):
    """Value, norms and ratio for f1 = f2 = f3 = χ of the ball train.

    The balls lie in all three thickened surfaces, so restriction changes
    nothing; distinct balls are at distance >= 1, so the trilinear value is the
    single-ball integral times the number of triples with k + k' = k''.
    """
    train = BallTrain(R, radius)
    v0 = ball_triple_integral(radius, method, grid_step)
    value = v0 * train.sum_triples()
    norm = train.l2_norm()
    return {"R": R, "epsilon": eps, "value": value, "norm_product": norm ** 3,
            "ratio": value / norm ** 3}


def counterexample_sweep(R_values=(4, 8, 16, 32, 64), eps=2.0 ** -5, method="quad"):
    rows = [restricted_transversality_counterexample(R, eps, method=method) for R in R_values]
    r = np.array([row["R"] for row in rows], dtype=float)
    ratio = np.array([row["ratio"] for row in rows])
    slope = float(np.polyfit(np.log(r), np.log(ratio), 1)[0]) if len(rows) > 1 else float("nan")
    return rows, slope


def crossover_R(calibration=4.0, eps=2.0 ** -5, radius=2.0 ** -10, det_samples=1000):
    """Smallest R = 4^j at which the ratio exceeds calibration * eps^{3/2} A^{1/2},
    with A taken from the convolution-constrained determinant."""
    A = 1.0 / constrained_det_min(det_samples, eps=eps)
    target = calibration * eps ** 1.5 * np.sqrt(A)
    R = 1
    while R < 10 ** 30:
        if restricted_transversality_counterexample(R, eps, radius)["ratio"] > target:
            return R, target
        R *= 4
    return None, target
