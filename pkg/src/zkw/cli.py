"""Command-line front end: ``zkw <experiment> --config <file> [--out DIR] [--seed U64] [--jobs N]``
and ``zkw compare <manifest_a> <manifest_b>``.

Configs are JSON objects with top-level keys experiment, seed, lambda, radius,
dt, T and params; unknown keys are rejected.  Every run writes CSV outputs and a
manifest.json with the config hash, output digests and headline metrics.
"""

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigInvalid, ManifestMismatch, ZKWError

TOP_KEYS = {"experiment", "seed", "lambda", "radius", "dt", "T", "params"}
RANDOMIZED = {"solve", "trilinear-sweep", "weighted-trilinear", "counting"}

# experiment -> (top-level defaults, params defaults)
SCHEMAS = {
    "solve": ({"lambda": 1, "radius": 32, "dt": 1e-3, "T": 0.1},
              {"decay": 1.0, "amplitude": 1.0, "sign": 1.0, "record_every": 10,
               "target_mode": [1, 0], "hs": [0.0, 1.0, 2.0]}),
    "norm-inflation-1": ({"lambda": 1, "radius": 64, "dt": 1e-5, "T": None},
                         {"A": 1.0, "B": 1.0, "N": 16, "sign": -1.0, "record_every": 100,
                          "hs": [1.0]}),
    "norm-inflation-2": ({"lambda": 1, "radius": 64, "dt": 1e-5, "T": 1e-2},
                         {"A": 1.0, "B": 1.0, "N": 16, "sign": 1.0, "record_every": 10,
                          "mode": [16, 1], "hs": [1.0]}),
    "trilinear-sweep": ({"lambda": 1},
                        {"N_values": [16, 32, 64, 128], "instances_per_N": 150,
                         "rho_range": [0.004, 0.02], "log2_L_extra": 2, "regularity": 0.5,
                         "A_ratio_max": 0.5, "max_attempts": 20}),
    "weighted-trilinear": ({"lambda": 1},
                           {"N_values": [32, 64, 128], "instances_per_N": 40, "n3_div": 4,
                            "eps": 0.01, "rho": 0.03, "resonant_N": [8, 16, 32],
                            "resonant_L": [[1, 1, 1], [1, 2, 2], [1, 4, 4]]}),
    "counting": ({},
                 {"draws": 1000, "lw_max": 64, "lambdas": [1, 2, 3], "radius": 200,
                  "witness_w": 0.01, "witness_ell": [8, 16, 32, 64]}),
    "decompose": ({},
                  {"N1": 64, "A_floor": 8, "A_max": 32, "flat_d": [1, 2, 4], "q": 4}),
    "thickened": ({},
                  {"eps": [0.1, 0.05], "normals": [[1, 0, 0], [0, 1, 0], [1, 1, 1]],
                   "half_width": 0.4, "box": 0.5, "method": "grid"}),
    "counterexample": ({},
                       {"R_values": [4, 8, 16, 32, 64], "epsilon": 0.03125, "method": "quad",
                        "calibration": 4.0}),
}


def fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return fmt(f) if not math.isfinite(f) else float(fmt(f))
    return v


def canonical(obj):
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))


def load_config(path, experiment, seed=None):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config: {exc}") from exc
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config is not valid JSON: {exc}") from exc
    return resolve_config(raw, experiment, seed)


def resolve_config(raw, experiment, seed=None):
    if not isinstance(raw, dict) or not raw:
        raise ConfigInvalid("config is empty")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigInvalid(f"unknown keys: {sorted(unknown)}")
    if "experiment" not in raw:
        raise ConfigInvalid("config needs an 'experiment' key")
    if raw["experiment"] != experiment:
        raise ConfigInvalid(f"config is for {raw['experiment']!r}, not {experiment!r}")
    if experiment not in SCHEMAS:
        raise ConfigInvalid(f"unknown experiment {experiment!r}")
    top, params = SCHEMAS[experiment]
    extra = {k for k in raw if k not in top and k not in ("experiment", "seed", "params")}
    if extra:
        raise ConfigInvalid(f"keys not used by {experiment}: {sorted(extra)}")
    given = raw.get("params", {})
    if not isinstance(given, dict):
        raise ConfigInvalid("params must be an object")
    bad = set(given) - set(params)
    if bad:
        raise ConfigInvalid(f"unknown params for {experiment}: {sorted(bad)}")
    cfg = {"experiment": experiment}
    for k, v in top.items():
        cfg[k] = raw.get(k, v)
    cfg["params"] = {**params, **given}
    s = seed if seed is not None else raw.get("seed")
    if s is None and experiment in RANDOMIZED:
        raise ConfigInvalid(f"{experiment} needs a seed")
    if s is not None:
        if not isinstance(s, int) or isinstance(s, bool) or not 0 <= s < 2 ** 64:
            raise ConfigInvalid("seed must be an unsigned 64-bit integer")
    cfg["seed"] = s
    return cfg


class Output:
    """Collects CSV files in memory so digests are computed on the exact bytes written."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.files = {}

    def csv(self, name, header, rows, comments=()):
        buf = io.StringIO()
        for c in comments:
            buf.write(f"# {c}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            vals = [r[h] for h in header] if isinstance(r, dict) else r
            w.writerow([fmt(v) for v in vals])
        self.files[name] = buf.getvalue().encode()

    def write(self, manifest):
        self.dir.mkdir(parents=True, exist_ok=True)
        digests = {}
        for name, data in sorted(self.files.items()):
            (self.dir / name).write_bytes(data)
            digests[name] = hashlib.sha256(data).hexdigest()
        manifest["outputs"] = digests
        text = json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n"
        (self.dir / "manifest.json").write_text(text)
        return manifest


# --- experiments --------------------------------------------------------------

def _solver_run(cfg, out, state_fn, target, complex_data):
    from .zk_solver import ZKSolver, conserved_quantities, hs_norms, integrate
    p = cfg["params"]
    lam, radius = cfg["lambda"], cfg["radius"]
    solver = ZKSolver(lam, 2 * radius * lam, p["sign"])
    st = state_fn(solver)
    T = cfg["T"]
    hs = list(p["hs"])

    def obs(s):
        row = {"t": s.t, "abs_u_hat": abs(s.mode(*target))}
        if complex_data:
            row["mass"], row["energy"] = float("nan"), float("nan")
        else:
            row["mass"], row["energy"] = conserved_quantities(s)
        for sv, v in zip(hs, hs_norms(s, hs)):
            row[f"hs_{fmt(sv)}"] = v
        return row

    final, rows = integrate(solver, st, T, cfg["dt"], p["record_every"], obs)
    header = ["t", "abs_u_hat", "mass", "energy"] + [f"hs_{fmt(s)}" for s in hs]
    out.csv("trajectory.csv", header, rows)
    return solver, final, rows


def exp_solve(cfg, out, jobs):
    from .zk_solver import random_smooth_real
    p = cfg["params"]

    def init(solver):
        return random_smooth_real(solver, cfg["seed"], p["decay"], p["amplitude"])

    a, b = p["target_mode"]
    lam = cfg["lambda"]
    solver, final, rows = _solver_run(cfg, out, init, (a * lam, b * lam), False)
    m0, e0 = rows[0]["mass"], rows[0]["energy"]
    metrics = {"mass_drift": max(abs(r["mass"] - m0) for r in rows) / m0,
               "energy_drift": max(abs(r["energy"] - e0) for r in rows) / abs(e0),
               "hermitian_defect": final.hermitian_defect(),
               "dt_max0": solver.dt_max(1.0), "fft": solver.fft_name}
    return metrics, 0


def exp_norm_inflation_1(cfg, out, jobs):
    from .zk_solver import fit_growth_rate, norm_inflation_1_state
    p = cfg["params"]
    A, B, N = p["A"], p["B"], p["N"]
    if cfg["T"] is None:
        cfg["T"] = 4.0 / (N * A)
    solver, final, rows = _solver_run(cfg, out, lambda s: norm_inflation_1_state(s, A, B, N),
                                      (N * cfg["lambda"], 0), True)
    off = final.c.copy()
    off[:, 0] = 0
    t = [r["t"] for r in rows]
    amp = [r["abs_u_hat"] for r in rows]
    rate = fit_growth_rate(t, amp) if B else float("nan")
    return {"fitted_rate": rate, "expected_rate": N * A, "off_axis_max": float(np.max(np.abs(off))),
            "dt_max0": solver.dt_max(abs(A) + abs(B)), "fft": solver.fft_name}, 0


def exp_norm_inflation_2(cfg, out, jobs):
    from .zk_solver import norm_inflation_2_state
    p = cfg["params"]
    A, B, N = p["A"], p["B"], p["N"]
    lam = cfg["lambda"]
    a, b = p["mode"]
    solver, final, rows = _solver_run(cfg, out, lambda s: norm_inflation_2_state(s, A, B, N),
                                      (a * lam, b * lam), True)
    ratios = [r["abs_u_hat"] / (N * r["t"] * A * B) for r in rows if r["t"] >= 1e-3 and A * B]
    return {"ratio_min": min(ratios) if ratios else float("nan"),
            "ratio_max": max(ratios) if ratios else float("nan"),
            "dt_max0": solver.dt_max(abs(A) + abs(B)), "fft": solver.fft_name}, 0


def _skip_code(n_ok, n_skip):
    total = n_ok + n_skip
    return 2 if total and n_skip / total > 0.5 else 0


def exp_trilinear_sweep(cfg, out, jobs):
    from .trilinear_forms import SweepConfig, bound_ratio_sweep, max_ratio_by_N
    p = cfg["params"]
    sc = SweepConfig(N_values=tuple(p["N_values"]), instances_per_N=p["instances_per_N"],
                     seed=cfg["seed"], rho_range=tuple(p["rho_range"]),
                     log2_L_extra=p["log2_L_extra"], regularity=p["regularity"],
                     A_ratio_max=p["A_ratio_max"], max_attempts=p["max_attempts"])
    reports, skipped = bound_ratio_sweep(sc, jobs)
    rows = [r.row() for r in reports]
    header = ["value", "norm1", "norm2", "norm3", "C", "ratio", "N1", "N2", "N3",
              "L1", "L2", "L3", "A", "lambda", "tag"]
    out.csv("sweep.csv", header, rows, comments=[f"seed={cfg['seed']}"])
    metrics = {"instances": len(reports) // 2, "skipped": len(skipped)}
    for tag in ("C_tilde", "C"):
        by = max_ratio_by_N(reports, tag)
        metrics[f"max_ratio_{tag}"] = {str(k): v for k, v in by.items()}
        mean, disp = {}, {}
        for N in by:
            vals = [r.ratio for r in reports if r.meta["tag"] == tag and r.meta["N1"] == N]
            mean[str(N)], disp[str(N)] = float(np.mean(vals)), float(np.std(vals))
        metrics[f"mean_ratio_{tag}"] = mean
        metrics[f"ratio_dispersion_{tag}"] = disp
    return metrics, _skip_code(len(reports) // 2, len(skipped))


def exp_weighted(cfg, out, jobs):
    from .trilinear_forms import WeightedSweepConfig, resonant_weighted_ratio, weighted_sweep
    p = cfg["params"]
    wc = WeightedSweepConfig(N_values=tuple(p["N_values"]), instances_per_N=p["instances_per_N"],
                             n3_div=p["n3_div"], seed=cfg["seed"], eps=p["eps"], rho=p["rho"])
    reports, skipped = weighted_sweep(wc)
    header = ["value", "norm1", "norm2", "norm3", "C", "ratio", "N1", "N2", "N3",
              "L1", "L2", "L3", "A", "lambda", "tag"]
    out.csv("weighted.csv", header, [r.row() for r in reports], comments=[f"seed={cfg['seed']}"])
    res = []
    for N in p["resonant_N"]:
        for L in p["resonant_L"]:
            r = resonant_weighted_ratio(N, *L)
            res.append({"N": N, "L1": L[0], "L2": L[1], "L3": L[2], "ratio": r,
                        "normalized": r / (N * math.sqrt(min(L)))})
    out.csv("resonant.csv", ["N", "L1", "L2", "L3", "ratio", "normalized"], res)
    vals = [r.ratio for r in reports]
    metrics = {"instances": len(reports), "skipped": len(skipped),
               "max_ratio": max(vals) if vals else float("nan"),
               "mean_ratio": float(np.mean(vals)) if vals else float("nan"),
               "ratio_dispersion": float(np.std(vals)) if vals else float("nan"),
               "resonant_normalized_max": max(r["normalized"] for r in res) if res else float("nan")}
    return metrics, _skip_code(len(reports), len(skipped))


def exp_counting(cfg, out, jobs):
    from .lattice_counting import Strip, count_strip, count_strip_irrational_torus
    from .spectral_lattice import DualLattice
    p = cfg["params"]
    rng = np.random.default_rng(cfg["seed"])
    rows, worst = [], 0.0
    for _ in range(p["draws"]):
        lam = int(rng.choice(p["lambdas"]))
        lw = float(np.exp(rng.uniform(0, np.log(p["lw_max"]))))
        ell = float(np.exp(rng.uniform(np.log(lw) / 2 - 1.5, np.log(lw) / 2 + 1.5)))
        w = lw / ell
        alpha = (float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1)))
        n = count_strip(Strip(ell, w, alpha), DualLattice(lam, p["radius"]))
        worst = max(worst, n / (ell * w * lam * lam))
        rows.append((ell, w, lam, alpha[0], alpha[1], n))
    out.csv("counts.csv", ["ell", "w", "lambda", "alpha_x", "alpha_y", "count"], rows,
            comments=[f"seed={cfg['seed']}"])
    wit = [(ell, p["witness_w"], 1, 0.0, 0.0,
            count_strip_irrational_torus(Strip(ell, p["witness_w"]), 1)) for ell in p["witness_ell"]]
    out.csv("witness.csv", ["ell", "w", "lambda", "alpha_x", "alpha_y", "count"], wit)
    counts = [r[5] for r in wit]
    ratios = [b / a for a, b in zip(counts, counts[1:])]
    return {"max_count_ratio": worst, "witness_counts": counts,
            "witness_min_consecutive_ratio": min(ratios) if ratios else float("nan")}, 0


def exp_decompose(cfg, out, jobs):
    from .freq_decomposition import multiplicity_summary
    p = cfg["params"]
    summary, covers = multiplicity_summary(p["N1"], p["A_floor"], p["A_max"], tuple(p["flat_d"]), p["q"])
    header = ["A", "m1a", "m1b", "m2a", "m2b", "class"]
    for name, cover in covers.items():
        out.csv(f"cover_{name}.csv", header, list(cover.rows()))
    return {"multiplicity": summary}, 0


def exp_thickened(cfg, out, jobs):
    from .thickened_surfaces import (plane, plane_box_fields, plane_triple_volume,
                                     thickened_trilinear, triple_intersection_volume)
    p = cfg["params"]
    normals = [np.asarray(n, dtype=float) / np.linalg.norm(n) for n in p["normals"]]
    box = p["box"]
    dom = ((-box, box),) * 3
    rows, worst = [], 0.0
    for eps in p["eps"]:
        v = triple_intersection_volume(*(plane(n, 0.0, eps, dom) for n in normals), method=p["method"])
        exact = plane_triple_volume(normals, eps)
        fields, tri_exact = plane_box_fields(normals, eps, p["half_width"], eps / 4)
        rep = thickened_trilinear(*fields, eps=eps, A=v.A)
        worst = max(worst, abs(v.value / exact - 1))
        rows.append({"epsilon": eps, "volume": v.value, "volume_error": v.error, "volume_exact": exact,
                     "det_min": v.det_min, "trilinear": rep.value, "trilinear_exact": tri_exact,
                     "ratio": rep.ratio})
    header = ["epsilon", "volume", "volume_error", "volume_exact", "det_min", "trilinear",
              "trilinear_exact", "ratio"]
    out.csv("thickened.csv", header, rows)
    return {"max_volume_rel_error": worst}, 0


def exp_counterexample(cfg, out, jobs):
    from .thickened_surfaces import constrained_det_min, counterexample_sweep, crossover_R
    p = cfg["params"]
    rows, slope = counterexample_sweep(tuple(p["R_values"]), p["epsilon"], p["method"])
    seed = cfg["seed"] if cfg["seed"] is not None else 0
    out.csv("counterexample.csv", ["R", "epsilon", "value", "norm_product", "ratio"], rows,
            comments=[f"seed={seed}"])
    R_cross, target = crossover_R(p["calibration"], p["epsilon"])
    return {"fitted_exponent": slope, "constrained_det_min": constrained_det_min(eps=p["epsilon"]),
            "crossover_R": R_cross, "bound_target": target}, 0


EXPERIMENTS = {
    "solve": exp_solve,
    "norm-inflation-1": exp_norm_inflation_1,
    "norm-inflation-2": exp_norm_inflation_2,
    "trilinear-sweep": exp_trilinear_sweep,
    "weighted-trilinear": exp_weighted,
    "counting": exp_counting,
    "decompose": exp_decompose,
    "thickened": exp_thickened,
    "counterexample": exp_counterexample,
}


def run(experiment, config_path, out_dir="zkw_out", seed=None, jobs=1):
    """Run one experiment; returns (exit code, manifest)."""
    cfg = load_config(config_path, experiment, seed)
    config_hash = hashlib.sha256(canonical(cfg).encode()).hexdigest()
    out = Output(out_dir)
    metrics, code = EXPERIMENTS[experiment](cfg, out, jobs)
    manifest = {"experiment": experiment, "config": cfg, "config_hash": config_hash,
                "version": __version__, "metrics": metrics, "exit_code": code}
    return code, out.write(manifest)


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def compare(path_a, path_b, tol=0.0):
    """Metric deltas between two manifests; entries beyond tol are flagged."""
    a = json.loads(Path(path_a).read_text())
    b = json.loads(Path(path_b).read_text())
    if a.get("experiment") != b.get("experiment"):
        raise ManifestMismatch(f"{a.get('experiment')!r} vs {b.get('experiment')!r}")
    fa, fb = _flatten(a.get("metrics", {})), _flatten(b.get("metrics", {}))
    report = []
    for key in sorted(set(fa) | set(fb)):
        va, vb = fa.get(key), fb.get(key)
        if va == vb:
            continue
        entry = {"metric": key, "a": va, "b": vb}
        try:
            delta = float(vb) - float(va)
            entry["delta"] = delta
            entry["flagged"] = abs(delta) > tol
            disp = fa.get(_dispersion_key(key))
            if disp is not None:
                entry["within_dispersion"] = abs(delta) <= float(disp)
        except (TypeError, ValueError):
            entry["flagged"] = True
        report.append(entry)
    outputs_equal = a.get("outputs") == b.get("outputs")
    return report, outputs_equal


def _dispersion_key(key):
    # sweep means are compared against the spread of the ratios they average;
    # maxima of heavy-tailed samples are reported but not held to it
    if key.startswith("mean_ratio_"):
        return "ratio_dispersion_" + key[len("mean_ratio_"):]
    if key == "mean_ratio":
        return "ratio_dispersion"
    return None


def _jobs(arg):
    if arg is not None:
        return arg
    env = os.environ.get("ZKW_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigInvalid("ZKW_JOBS must be an integer") from exc
    return 1


def build_parser():
    ap = argparse.ArgumentParser(prog="zkw", description=__doc__.splitlines()[0])
    ap.add_argument("experiment", choices=sorted(EXPERIMENTS) + ["compare"])
    ap.add_argument("manifests", nargs="*", help="two manifest paths for compare")
    ap.add_argument("--config")
    ap.add_argument("--out", default="zkw_out")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--jobs", type=int)
    ap.add_argument("--tol", type=float, default=0.0, help="compare: flag deltas above this")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.experiment == "compare":
            if len(args.manifests) != 2:
                raise ConfigInvalid("compare needs two manifest paths")
            report, same = compare(*args.manifests, tol=args.tol)
            if not report:
                print("no metric differences" + ("" if same else " (output digests differ)"))
            for e in report:
                line = f"{e['metric']}: {fmt(e['a'])} -> {fmt(e['b'])}"
                if "delta" in e:
                    line += f" (delta {fmt(e['delta'])})"
                if e.get("flagged"):
                    line += " FLAGGED"
                if "within_dispersion" in e:
                    line += " within dispersion" if e["within_dispersion"] else " beyond dispersion"
                print(line)
            return 0
        if args.manifests:
            raise ConfigInvalid("unexpected positional arguments")
        if not args.config:
            raise ConfigInvalid("--config is required")
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigInvalid("seed must be an unsigned 64-bit integer")
        code, manifest = run(args.experiment, args.config, args.out, args.seed, _jobs(args.jobs))
        for k, v in sorted(_flatten(manifest["metrics"]).items()):
            print(f"{k} = {fmt(v) if not isinstance(v, (list, str)) else v}")
        return code
    except (ZKWError, OSError) as exc:
        print(f"zkw: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
