"""One test per acceptance criterion, each printing a PASS/FAIL line."""

import json
import math

import numpy as np
import pytest

from zkw import cli
from zkw.freq_decomposition import multiplicity_summary
from zkw.lattice_counting import Strip, count_strip, count_strip_irrational_torus
from zkw.spectral_lattice import DualLattice
from zkw.thickened_surfaces import (constrained_det_min, counterexample_sweep, plane,
                                    triple_intersection_volume)
from zkw.trilinear_forms import (SweepConfig, bound_ratio_sweep, max_ratio_by_N, mod_norm,
                                 overlap_kernel, resonant_weighted_ratio, sharpness_triple,
                                 trilinear_form)
from zkw.zk_solver import (ZKSolver, conserved_quantities, convergence_errors, fit_growth_rate,
                           integrate, random_smooth_real, run_norm_inflation_1,
                           run_norm_inflation_2, ORDER_DTS)

from test_lattice_counting import brute_strip

pytestmark = pytest.mark.slow


def test_01_norm_inflation_1(verdict):
    N, A = 16, 1.0
    h = run_norm_inflation_1(A=A, B=1.0, N=N, dt=1e-5, n=128)
    rate = fit_growth_rate(h.t, h.amp)
    pointwise = np.max(np.abs(h.abs_amp() / np.exp(h.t * N * A) - 1))
    ok = abs(rate / (N * A) - 1) <= 1e-3 and h.off_axis_max < 1e-12
    verdict(1, ok, f"rate {rate:.9f} vs NA = {N * A:g}; off-axis max {h.off_axis_max:.1e}; "
                   f"max |amp/e^(tNA) - 1| = {pointwise:.1e}")


def test_02_norm_inflation_2(verdict):
    N = 16
    h = run_norm_inflation_2(A=1.0, B=1.0, N=N, T=1e-2, dt=1e-5, n=128)
    keep = h.t >= 1e-3 - 1e-12
    ratio = h.abs_amp()[keep] / (N * h.t[keep])
    ok = bool(np.all((ratio >= 0.98) & (ratio <= 1.02)))
    verdict(2, ok, f"|u(N,1)|/(N t AB) in [{ratio.min():.5f}, {ratio.max():.5f}] "
                   f"over t in [1e-3, 1e-2]")


def test_03_conservation(verdict):
    s = ZKSolver(1, 128)
    st0 = random_smooth_real(s, seed=3, decay=1.0)
    M0, E0 = conserved_quantities(st0)
    _, rec = integrate(s, st0, 0.1, 1e-3, 10, conserved_quantities)
    dM = max(abs(m - M0) for m, _ in rec) / M0
    dE = max(abs(e - E0) for _, e in rec) / abs(E0)
    verdict(3, dM <= 1e-8 and dE <= 1e-6, f"mass drift {dM:.2e}, energy drift {dE:.2e}")


def test_04_sharpness(verdict):
    worst = 0.0
    # third constraint inactive: L3 >= L1 + L2
    for N in (8, 16, 32, 64):
        for L1, L2, L3 in [(1, 1, 2), (1, 2, 3), (0.5, 1, 4), (1 / 64, 1 / 64, 1 / 32)]:
            fs = sharpness_triple(N, L1, L2, L3)
            v = trilinear_form(*fs)
            ratio = v / np.prod([mod_norm(f) for f in fs])
            worst = max(worst, abs(v / (4 * L1 * L2) - 1),
                        abs(ratio / math.sqrt(2 * L1 * 2 * L2 / (2 * L3)) - 1))
    # L1 <= L2 = L3: the slab cuts two corners of the rectangle
    for N in (8, 16, 32, 64):
        for L1, L2 in [(1, 2), (0.5, 4), (1, 1)]:
            fs = sharpness_triple(N, L1, L2, L2)
            v = trilinear_form(*fs)
            ratio = v / np.prod([mod_norm(f) for f in fs])
            closed = 4 * L1 * L2 - L1 ** 2
            worst = max(worst, abs(v / closed - 1),
                        abs(ratio / (closed / math.sqrt(8 * L1 * L2 * L2)) - 1))
    verdict(4, worst <= 1e-12, f"max relative deviation from closed forms {worst:.1e}")


def test_05_bound_sweep(verdict):
    reps, skipped = bound_ratio_sweep(SweepConfig(instances_per_N=200, seed=2024))
    n = len(reps) // 2
    lines, ok = [], n >= 500
    for tag in ("C", "C_tilde"):
        by = max_ratio_by_N(reps, tag)
        growth = by[128] / by[16]
        ok &= all(np.isfinite(v) for v in by.values()) and growth <= 2
        lines.append(f"{tag}: " + ", ".join(f"{k}:{v:.3f}" for k, v in by.items())
                     + f" (128/16 = {growth:.2f})")
    verdict(5, ok, f"{n} valid instances, {len(skipped)} skipped; " + "; ".join(lines))


def test_06_weighted_sharpness(verdict):
    vals = []
    for N in (8, 16, 32):
        for L in [(1, 1, 1), (1, 2, 2), (1, 4, 4), (0.5, 1, 2)]:
            vals.append(resonant_weighted_ratio(N, *L) / (N * math.sqrt(min(L))))
    ok = all(0.5 <= v <= 2 for v in vals)
    verdict(6, ok, f"weighted ratio / (N L_min^1/2) in [{min(vals):.3f}, {max(vals):.3f}], "
                   f"required [0.5, 2]")


def test_07_liouville_counting(verdict):
    rng = np.random.default_rng(7)
    worst, mismatches = 0.0, 0
    for _ in range(1000):
        lam = int(rng.choice([1, 2, 3]))
        lw = float(np.exp(rng.uniform(0, np.log(64))))
        ell = float(np.exp(rng.uniform(np.log(lw) / 2 - 1.5, np.log(lw) / 2 + 1.5)))
        w = lw / ell
        alpha = (float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)))
        n = brute_strip(ell, w, alpha, lam)
        mismatches += n != count_strip(Strip(ell, w, alpha), DualLattice(lam, 200))
        worst = max(worst, n / (64 * ell * w * lam * lam))
    counts = [count_strip_irrational_torus(Strip(ell, 0.01), 1) for ell in (8, 16, 32, 64)]
    ratios = [b / a for a, b in zip(counts, counts[1:])]
    ok = worst <= 1 and mismatches == 0 and min(ratios) >= 1.5
    verdict(7, ok, f"max count/(64 lw lam^2) = {worst:.4f}, {mismatches} counter mismatches; "
                   f"witness counts {counts}, min ratio {min(ratios):.2f}")


def test_08_whitney_multiplicity(verdict):
    rows = {N1: multiplicity_summary(N1, A_floor=8, A_max=32)[0] for N1 in (64, 128, 256)}
    ref = rows[64]
    ok = all(r == ref for r in rows.values())
    verdict(8, ok, "multiplicities " + ", ".join(f"{k}={v}" for k, v in ref.items())
            + " " + ("identical" if ok else f"differ: {rows}") + " for N1 in {64, 128, 256}")


def stratified_area(phi, l1, l2, l3, rng, side=3163):
    """Jittered-grid Monte Carlo (side^2 ~ 10^7 samples) on the bounding box of the region."""
    a0, a1 = max(-l1, -phi - l3 - l2), min(l1, -phi + l3 + l2)
    b0, b1 = max(-l2, -phi - l3 - l1), min(l2, -phi + l3 + l1)
    if a1 <= a0 or b1 <= b0:
        return 0.0
    ha, hb = (a1 - a0) / side, (b1 - b0) / side
    cols = b0 + hb * np.arange(side)
    hits = 0
    for start in range(0, side, 400):
        rows = np.arange(start, min(start + 400, side))
        s1 = a0 + ha * (rows[:, None] + rng.random((len(rows), side)))
        s2 = cols[None, :] + hb * rng.random((len(rows), side))
        hits += int(np.count_nonzero(np.abs(s1 + s2 + phi) <= l3))
    return hits * ha * hb


def test_09_overlap_monte_carlo(verdict):
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(100):
        L = rng.uniform(0.05, 3.0, 3)
        phi = rng.uniform(-1.1, 1.1) * L.sum()
        exact = float(overlap_kernel(phi, *L))
        mc = stratified_area(phi, *L, rng)
        worst = max(worst, abs(mc - exact) / max(1.0, exact))
    verdict(9, worst <= 1e-3, f"max |MC - exact| / max(1, exact) = {worst:.2e} over 100 cases")


def test_10_thickened(verdict):
    eps = 0.1
    dom = ((-0.5, 0.5),) * 3
    s = [plane(n, 0.0, eps, dom) for n in np.eye(3)]
    vol = triple_intersection_volume(*s, resolution=eps / 8).value
    rel = abs(vol / (2 * eps) ** 3 - 1)
    _, slope = counterexample_sweep((8, 16, 32))
    det = constrained_det_min(1000, seed=0)
    ok = rel <= 0.01 and 0.4 <= slope <= 0.6 and det >= 0.5
    verdict(10, ok, f"cube volume rel err {rel:.1e}; counterexample exponent {slope:.3f}; "
                    f"constrained |det| min {det:.3f}")


def test_11_solver_order(verdict):
    errs = convergence_errors()
    slope = float(np.polyfit(np.log(ORDER_DTS), np.log(errs), 1)[0])
    verdict(11, abs(slope - 4) <= 0.3, f"slope {slope:.3f}; errors "
                                        + ", ".join(f"{e:.2e}" for e in errs))


SMALL = {
    "solve": {"seed": 1, "radius": 16, "dt": 1e-3, "T": 0.02},
    "norm-inflation-1": {"radius": 16, "dt": 1e-4, "T": 0.01, "params": {"N": 8}},
    "norm-inflation-2": {"radius": 16, "dt": 1e-4, "T": 2e-3, "params": {"N": 8, "mode": [8, 1]}},
    "trilinear-sweep": {"seed": 3, "params": {"N_values": [16, 32], "instances_per_N": 8}},
    "weighted-trilinear": {"seed": 3, "params": {"N_values": [32], "instances_per_N": 4,
                                                  "resonant_N": [8]}},
    "counting": {"seed": 3, "params": {"draws": 50}},
    "decompose": {"params": {"N1": 64, "A_max": 16}},
    "thickened": {"params": {"eps": [0.1]}},
    "counterexample": {"params": {"R_values": [4, 8]}},
}


def test_12_determinism(verdict, tmp_path):
    assert set(SMALL) == set(cli.EXPERIMENTS)
    differ = []
    for name, body in SMALL.items():
        cfg = tmp_path / f"{name}.json"
        cfg.write_text(json.dumps({"experiment": name, **body}))
        dirs = [tmp_path / f"{name}_{i}" for i in (0, 1)]
        for d in dirs:
            cli.run(name, cfg, d)
        files = sorted(p.name for p in dirs[0].iterdir())
        if files != sorted(p.name for p in dirs[1].iterdir()):
            differ.append(name)
            continue
        if any((dirs[0] / f).read_bytes() != (dirs[1] / f).read_bytes() for f in files):
            differ.append(name)
    verdict(12, not differ, f"{len(SMALL)} experiments re-run; byte differences in {differ or 'none'}")
