"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is run on identical inputs in both backends; the script checks
that the results agree before reporting timings.
"""

import argparse
import time

import numpy as np

from zkw import kernels
from zkw.lattice_counting import GUARD, Strip, _column_range
from zkw.spectral_lattice import DualLattice, dispersion_phi


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def overlap_case(rng):
    phi = rng.uniform(-10, 10, 200_000)
    return lambda m: m.overlap_kernel_array(phi, 1.5, 2.0, 3.0)


def trilinear_case(rng):
    lat = DualLattice(1, 40)
    h = lat.half
    n = 400
    i1 = rng.integers(-20, 20, (n, 2)).astype(np.int64)
    i2 = rng.integers(-20, 20, (n, 2)).astype(np.int64)
    v1, v2 = rng.uniform(0.1, 1, n), rng.uniform(0.1, 1, n)
    s1 = dispersion_phi((i1[:, 0] * 1.0, i1[:, 1] * 1.0))
    s2 = dispersion_phi((i2[:, 0] * 1.0, i2[:, 1] * 1.0))
    g3 = rng.uniform(0, 1, (lat.size, lat.size))
    xi, eta = lat.coords()
    sym3 = np.ascontiguousarray(dispersion_phi((xi, eta)))
    return lambda m: m.trilinear_sum(i1, v1, s1, i2, v2, s2, g3, sym3, h,
                                     4.0, 8.0, 16.0, 1.0, 1.0, 0.5, 0.0)


def count_case(rng):
    strip = Strip(400.0, 3.0, (0.3, -0.2))
    rows, shift, halfw = strip.rows()
    a_min, a_max = _column_range(strip.bounding_box(), 3, None)
    return lambda m: m.count_slabs(a_min, a_max, 3.0, 1.0, rows, shift, halfw, GUARD)


def minima_case(rng):
    g1 = rng.uniform(-64, 64, (4096, 25, 2))
    g2 = rng.uniform(-64, 64, (4096, 25, 2))
    return lambda m: np.concatenate(m.pair_minima(g1, g2))


CASES = {"overlap_kernel_array": overlap_case, "trilinear_sum": trilinear_case,
         "count_slabs": count_case, "pair_minima": minima_case}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    mods = kernels.backends()
    if "cython" not in mods:
        print("compiled kernels not built; timing the numpy fallback only")
    print(f"{'kernel':<22}" + "".join(f"{name:>12}" for name in mods) + f"{'speedup':>10}")
    for name, make in CASES.items():
        fn = make(np.random.default_rng(0))
        res = {b: _best(lambda m=m: fn(m), args.repeat) for b, m in mods.items()}
        outs = [np.asarray(r[1], dtype=float) for r in res.values()]
        for o in outs[1:]:
            if not np.allclose(o, outs[0], rtol=1e-12, atol=1e-12):
                raise SystemExit(f"{name}: backends disagree")
        line = f"{name:<22}" + "".join(f"{res[b][0] * 1e3:>10.2f}ms" for b in mods)
        if "cython" in res:
            line += f"{res['python'][0] / res['cython'][0]:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
