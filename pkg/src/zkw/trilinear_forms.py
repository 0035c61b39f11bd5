"""Trilinear convolution forms on R x Z^2/lam for tensor-form inputs.

A ModFunction is f(tau, k) = g(k) 1{|tau - psi(k)| <= L}.  Integrating out tau
leaves, for each pair (k1, k2), the area of
{|s1| <= L1, |s2| <= L2, |s1 + s2 + Phi| <= L3} with
Phi = psi(k1) + psi(k2) - psi(k1 + k2); that area is ``overlap_kernel``.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import kernels
from .errors import HypothesisViolated, LatticeMismatch
from .resonance import (nlw_transversality, normals_det, resonance_Phi_hat, surface_normal,
                        symbol_gradient)
from .spectral_lattice import DualLattice, GridFunction, shell_contains, symbol_function


@dataclass
class ModFunction:
    g: GridFunction
    L: float
    symbol: str = "phi"
    N: float = None

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError("modulation width must be positive")
        symbol_function(self.symbol)

    @property
    def lattice(self):
        return self.g.lattice

    def profile(self):
        v = self.g.values
        if np.any(v.imag != 0):
            raise ValueError("trilinear forms expect real spatial profiles")
        return v.real

    def support_arrays(self):
        idx, amp = self.g.support()
        lam = self.lattice.lam
        psi = symbol_function(self.symbol)((idx[:, 0] / lam, idx[:, 1] / lam))
        return (np.ascontiguousarray(idx, dtype=np.int64),
                np.ascontiguousarray(amp.real, dtype=float),
                np.ascontiguousarray(psi, dtype=float))


def bracket(x):
    return np.sqrt(1.0 + np.square(x))


def overlap_kernel(Phi, L1, L2, L3):
    """Area of {|s1| <= L1, |s2| <= L2, |s1 + s2 + Phi| <= L3}; vectorised in Phi."""
    scalar = np.ndim(Phi) == 0
    out = kernels.overlap_kernel_array(np.ascontiguousarray(np.atleast_1d(Phi), dtype=float),
                                       float(L1), float(L2), float(L3))
    return float(out[0]) if scalar else out


def _check_same(f1, f2, f3):
    if not (f1.lattice == f2.lattice == f3.lattice):
        raise LatticeMismatch("forms need a common lattice")
    if not (f1.symbol == f2.symbol == f3.symbol):
        raise LatticeMismatch("forms need a common symbol")


def _form(f1, f2, f3, c31=0.0, c11=0.0, c3s=0.0):
    _check_same(f1, f2, f3)
    lat = f1.lattice
    i1, v1, s1 = f1.support_arrays()
    i2, v2, s2 = f2.support_arrays()
    if len(v1) == 0 or len(v2) == 0:
        return 0.0
    g3 = np.ascontiguousarray(f3.profile())
    xi, eta = lat.coords()
    sym3 = np.ascontiguousarray(symbol_function(f3.symbol)((xi, eta)), dtype=float)
    total = kernels.trilinear_sum(i1, v1, s1, i2, v2, s2, g3, sym3, lat.half,
                                  float(f1.L), float(f2.L), float(f3.L), float(lat.lam),
                                  float(c31), float(c11), float(c3s))
    return total / lat.lam ** 4


def trilinear_form(f1, f2, f3):
    return _form(f1, f2, f3)


def weighted_trilinear_form(f1, f2, f3, weight="k31_k11", N1=None, N3=None):
    """Form with the integrand multiplied by a frequency weight.

    weight="k31_k11": |k3_1| + |k1_1| N3/N1; weight="k3_sum": k3_1 + k3_2.
    """
    if weight == "k31_k11":
        return _form(f1, f2, f3, c31=1.0, c11=N3 / N1)
    if weight == "k3_sum":
        return _form(f1, f2, f3, c3s=1.0)
    raise ValueError(f"unknown weight {weight!r}")


def mod_norm(f):
    g = np.abs(f.g.values)
    return float(np.sqrt(np.sum(g * g) * 2.0 * f.L)) / f.lattice.lam


def _sorted_L(L1, L2, L3):
    return sorted((L1, L2, L3))


def constant_C(A, N, L1, L2, L3):
    lmin, lmed, lmax = _sorted_L(L1, L2, L3)
    return float(np.sqrt(lmin * bracket(N * lmed) * bracket(A * N * lmax)))


def constant_C_piecewise(A, N, L1, L2, L3):
    lmin, lmed, lmax = _sorted_L(L1, L2, L3)
    if lmed <= 1.0 / N:
        return float(np.sqrt(lmin * bracket(A * N * lmax)))
    return float(np.sqrt(A * L1 * L2 * L3) * N)


def constant_C_tilde(A, N1, L1, L2, L3):
    lmin, lmed, lmax = _sorted_L(L1, L2, L3)
    return float(np.sqrt(lmin * bracket(lmed / N1 ** 2) * bracket(A * lmax / N1 ** 2)))


def constant_C_tilde_piecewise(A, N1, L1, L2, L3):
    lmin, lmed, lmax = _sorted_L(L1, L2, L3)
    if lmed <= N1 ** 2:
        return float(np.sqrt(lmin * bracket(A * lmax / N1 ** 2)))
    return float(np.sqrt(A * L1 * L2 * L3) / N1 ** 2)


def support_size(f):
    return int(np.count_nonzero(f.g.values))


def cauchy_schwarz_bound(f1, f2, f3):
    P = min(support_size(f) for f in (f1, f2, f3))
    lmin = min(f1.L, f2.L, f3.L)
    prod = mod_norm(f1) * mod_norm(f2) * mod_norm(f3)
    return float(np.sqrt(P * lmin)) / f1.lattice.lam * prod


def prop81_bound(N1, N3, L1, L2, L3, eps=0.01):
    lmin, _, lmax = _sorted_L(L1, L2, L3)
    return float(N3 ** (1 + eps) * np.sqrt(lmin) * bracket(np.sqrt(lmax / N1)))


@dataclass
class TrilinearReport:
    value: float
    norms: tuple
    bound: float
    ratio: float
    meta: dict = field(default_factory=dict)

    def row(self):
        m = self.meta
        return {"value": self.value, "norm1": self.norms[0], "norm2": self.norms[1],
                "norm3": self.norms[2], "C": self.bound, "ratio": self.ratio,
                "N1": m.get("N1"), "N2": m.get("N2"), "N3": m.get("N3"),
                "L1": m.get("L1"), "L2": m.get("L2"), "L3": m.get("L3"),
                "A": m.get("A"), "lambda": m.get("lambda"), "tag": m.get("tag")}


def sharpness_triple(N, L1, L2, L3, symbol="psi_sym", lam=1, amplitudes=(1.0, 1.0, 1.0)):
    """Single modes at (N,-N), (N,2N), (2N,N), the resonant configuration for l1^3 + l2^3."""
    lat = DualLattice(lam, 2 * N + 1)
    modes = [(N * lam, -N * lam), (N * lam, 2 * N * lam), (2 * N * lam, N * lam)]
    out = []
    for (a, b), L, amp in zip(modes, (L1, L2, L3), amplitudes):
        out.append(ModFunction(GridFunction.from_modes(lat, {(a, b): amp}), L, symbol, 2 * N))
    return tuple(out)


def resonant_weighted_ratio(N, L1, L2, L3, lam=1):
    """Weighted form (k3_1 + k3_2) on the resonant single-mode triple, over the norm product."""
    fs = sharpness_triple(N, L1, L2, L3, "psi_sym", lam)
    value = weighted_trilinear_form(*fs, weight="k3_sum")
    return value / float(np.prod([mod_norm(f) for f in fs]))


def report(f1, f2, f3, bound_fn, meta, weight=None, **wkw):
    if weight is None:
        value = trilinear_form(f1, f2, f3)
    else:
        value = weighted_trilinear_form(f1, f2, f3, weight, **wkw)
    norms = (mod_norm(f1), mod_norm(f2), mod_norm(f3))
    prod = norms[0] * norms[1] * norms[2]
    if prod == 0:
        raise ValueError("norms must be positive")
    bound = bound_fn()
    return TrilinearReport(value, norms, bound, value / (bound * prod), meta)


# --- randomized sweeps -------------------------------------------------------

@dataclass
class SweepConfig:
    """Random instances for the C / C-tilde bound checks on lam = 1.

    Supports are lattice discs of radius rho*N around N*z_i with |z_i| in the
    shell (1/2, 1]; A is the smallest dyadic number certified by the
    transversality hypotheses of each estimate.
    """
    N_values: tuple = (16, 32, 64, 128)
    instances_per_N: int = 150
    seed: int = 0
    rho_range: tuple = (0.004, 0.02)
    log2_L_extra: int = 2
    regularity: float = 0.5
    A_ratio_max: float = 0.5
    max_attempts: int = 20

    def to_dict(self):
        return asdict(self)


def _disc_points(center, radius, N):
    r = int(np.ceil(radius)) + 1
    ca, cb = int(np.rint(center[0])), int(np.rint(center[1]))
    a, b = np.meshgrid(np.arange(ca - r, ca + r + 1), np.arange(cb - r, cb + r + 1), indexing="ij")
    a, b = a.ravel(), b.ravel()
    d = np.hypot(a - center[0], b - center[1])
    keep = d <= radius
    if not np.any(keep):
        keep = d == d.min()
    pts = np.stack([a[keep], b[keep]], axis=1)
    return pts[shell_contains(N, (pts[:, 0], pts[:, 1]))]


def _dyadic_ceil(x):
    return float(2.0 ** max(0, int(np.ceil(np.log2(x) - 1e-12))))


def _unit_in_shell(rng):
    r = rng.uniform(0.55, 0.95)
    t = rng.uniform(0, 2 * np.pi)
    return np.array([r * np.cos(t), r * np.sin(t)])


def _grad_spread(pts):
    gx, gy = symbol_gradient("phi", pts[:, 0].astype(float), pts[:, 1].astype(float))
    g = np.stack([gx, gy], axis=1)
    return float(np.max(np.linalg.norm(g[:, None, :] - g[None, :, :], axis=2)))


def _resonant_partner(z1, rng, tries=50):
    """A z2 with Phi_hat(z1, z2) = 0 and |z2|, |z1 + z2| in (0.55, 0.95), or None."""
    for _ in range(tries):
        t = rng.uniform(0, 2 * np.pi)
        d = np.array([np.cos(t), np.sin(t)])
        # Phi_hat(z1, s d) = s (a s^2 + b s + c); recover the quadratic from samples
        ss = np.array([-1.0, 1.0, 2.0])
        vals = [resonance_Phi_hat(tuple(z1), tuple(s * d)) / s for s in ss]
        coef = np.polyfit(ss, vals, 2)
        for s in np.roots(coef):
            if abs(s.imag) > 1e-12:
                continue
            z2 = s.real * d
            if 0.55 < np.linalg.norm(z2) < 0.95 and 0.55 < np.linalg.norm(z1 + z2) < 0.95:
                return z2
    return None


def generate_instance(N, rng, cfg):
    """Draw near-resonant supports and L's; raises HypothesisViolated on a failed hypothesis."""
    for _ in range(cfg.max_attempts):
        z1 = _unit_in_shell(rng)
        z2 = _resonant_partner(z1, rng)
        if z2 is not None:
            break
    else:
        raise HypothesisViolated("could not place a resonant triple in one shell")
    rho = rng.uniform(*cfg.rho_range)
    K1 = _disc_points(N * z1, rho * N, N)
    K2 = _disc_points(N * z2, rho * N, N)
    K3 = _disc_points(N * (z1 + z2), 2 * rho * N, N)
    if min(len(K1), len(K2), len(K3)) == 0:
        raise HypothesisViolated("empty support after shell restriction")
    # nlw-ZK transversality between K1 and K2
    T = np.abs(nlw_transversality((K1[:, None, 0], K1[:, None, 1]), (K2[None, :, 0], K2[None, :, 1])))
    tmin = float(T.min())
    if tmin == 0:
        raise HypothesisViolated("transversality polynomial vanishes on the supports")
    A_tilde = _dyadic_ceil(N ** 4 / tmin)
    # Assumption-type normal determinant on the rescaled surfaces
    u1, u2, u3 = K1 / N, K2 / N, K3 / N
    n1 = surface_normal((u1[:, 0], u1[:, 1]), "phi")[:, :, None, None]
    n2 = surface_normal((u2[:, 0], u2[:, 1]), "phi")[:, None, :, None]
    n3 = surface_normal((u3[:, 0], u3[:, 1]), "phi")[:, None, None, :]
    dmin = float(np.abs(normals_det(n1, n2, n3)).min())
    if dmin == 0:
        raise HypothesisViolated("degenerate normals")
    A_nlw = _dyadic_ceil(1.0 / dmin)
    A_max = cfg.A_ratio_max * N
    if A_tilde > A_max or A_nlw > A_max:
        raise HypothesisViolated(f"A too large (A~={A_tilde}, A={A_nlw}, N={N})")
    spread = max(_grad_spread(K) for K in (K1, K2, K3))
    if spread > cfg.regularity * N ** 2 / A_tilde:
        raise HypothesisViolated("gradient variation too large for the scale A")
    top = int(2 * np.log2(N)) + cfg.log2_L_extra
    Ls = [float(2.0 ** rng.integers(0, top + 1)) for _ in range(3)]
    amps = [rng.uniform(0.1, 1.0, len(K)) for K in (K1, K2, K3)]
    return {"N": N, "supports": (K1, K2, K3), "amps": amps, "L": Ls,
            "A_tilde": A_tilde, "A": A_nlw, "rho": rho}


def _build(inst, lam):
    N = inst["N"]
    K1, K2, K3 = inst["supports"]
    reach = max(int(np.abs(K).max()) for K in (K1, K2, K3)) + 1
    lat = DualLattice(lam, int(np.ceil(reach / lam)) + 1)
    fs = []
    scale = 1.0 if lam == 1 else float(N) ** 3
    for K, amp, L in zip(inst["supports"], inst["amps"], inst["L"]):
        g = GridFunction(lat)
        h = lat.half
        g.values[K[:, 0] + h, K[:, 1] + h] = amp
        fs.append(ModFunction(g, L / scale, "phi", 1.0 if lam != 1 else N))
    return fs


def evaluate_instance(inst):
    """Reports for C-tilde (on Z^2) and for C (same numerators read on Z^2/N)."""
    N = inst["N"]
    L1, L2, L3 = inst["L"]
    meta = {"N1": N, "N2": N, "N3": N, "L1": L1, "L2": L2, "L3": L3, "lambda": 1}
    f1, f2, f3 = _build(inst, 1)
    rt = report(f1, f2, f3, lambda: constant_C_tilde(inst["A_tilde"], N, L1, L2, L3),
                dict(meta, A=inst["A_tilde"], tag="C_tilde"))
    # rescaled lattice Z^2/N: symbol phi(k/N) = phi(k)/N^3, modulation widths L/N^3
    g1, g2, g3 = _build(inst, N)
    Lr = (L1 / N ** 3, L2 / N ** 3, L3 / N ** 3)
    value = trilinear_form(g1, g2, g3)
    norms = (mod_norm(g1), mod_norm(g2), mod_norm(g3))
    C = constant_C(inst["A"], N, *Lr)
    ratio = N ** 4 * value / (C * np.prod([N * n for n in norms]))
    rc = TrilinearReport(value, norms, C, float(ratio),
                         dict(meta, A=inst["A"], tag="C", lambda_eval=N))
    return [rt, rc]


def _sweep_task(args):
    N, i, seed, cfg = args
    rng = np.random.default_rng([seed, N, i])
    try:
        inst = generate_instance(N, rng, cfg)
    except HypothesisViolated as exc:
        return None, str(exc)
    return evaluate_instance(inst), None


def bound_ratio_sweep(cfg, jobs=1):
    """Run the sweep; returns (reports, skipped_messages).

    Instance i at shell N draws from default_rng([seed, N, i]), so results do
    not depend on ``jobs``.
    """
    tasks = [(N, i, cfg.seed, cfg) for N in cfg.N_values for i in range(cfg.instances_per_N)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_task, tasks, chunksize=8))
    else:
        results = [_sweep_task(t) for t in tasks]
    reports, skipped = [], []
    for reps, msg in results:
        if reps is None:
            skipped.append(msg)
        else:
            reports.extend(reps)
    return reports, skipped


def max_ratio_by_N(reports, tag):
    out = {}
    for r in reports:
        if r.meta["tag"] == tag:
            N = r.meta["N1"]
            out[N] = max(out.get(N, 0.0), r.ratio)
    return dict(sorted(out.items()))


@dataclass
class WeightedSweepConfig:
    """Random instances for the weighted high-high-low estimate (N3 = N1 / n3_div)."""
    N_values: tuple = (32, 64, 128)
    instances_per_N: int = 40
    n3_div: int = 4
    seed: int = 0
    eps: float = 0.01
    rho: float = 0.03

    def to_dict(self):
        return asdict(self)


def weighted_instance(N1, rng, cfg):
    N3 = N1 // cfg.n3_div
    z1 = _unit_in_shell(rng)
    w = _unit_in_shell(rng)
    K1 = _disc_points(N1 * z1, cfg.rho * N1, N1)
    K3 = _disc_points(N3 * w, cfg.rho * N1, N3)
    K2 = _disc_points(N3 * w - N1 * z1, 2 * cfg.rho * N1, N1)
    if min(len(K1), len(K2), len(K3)) == 0:
        raise HypothesisViolated("empty support after shell restriction")
    top = int(2 * np.log2(N1))
    Ls = sorted(float(2.0 ** rng.integers(0, top + 3)) for _ in range(3))
    if Ls[1] > N1 ** 2:
        raise HypothesisViolated("L_med exceeds N1^2")
    rng.shuffle(Ls)
    reach = max(int(np.abs(K).max()) for K in (K1, K2, K3)) + 1
    lat = DualLattice(1, reach + 1)
    fs = []
    for K, L, Nk in zip((K1, K2, K3), Ls, (N1, N1, N3)):
        g = GridFunction(lat)
        g.values[K[:, 0] + lat.half, K[:, 1] + lat.half] = rng.uniform(0.1, 1.0, len(K))
        fs.append(ModFunction(g, L, "phi", Nk))
    meta = {"N1": N1, "N2": N1, "N3": N3, "L1": Ls[0], "L2": Ls[1], "L3": Ls[2],
            "A": None, "lambda": 1, "tag": "prop81"}
    return report(fs[0], fs[1], fs[2], lambda: prop81_bound(N1, N3, *Ls, eps=cfg.eps), meta,
                  weight="k31_k11", N1=N1, N3=N3)


def weighted_sweep(cfg):
    reports, skipped = [], []
    for N in cfg.N_values:
        for i in range(cfg.instances_per_N):
            rng = np.random.default_rng([cfg.seed, N, i])
            try:
                reports.append(weighted_instance(N, rng, cfg))
            except HypothesisViolated as exc:
                skipped.append(str(exc))
    return reports, skipped
