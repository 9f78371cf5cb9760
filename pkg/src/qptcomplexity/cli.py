"""Batch front end.

Each subcommand regenerates one family of results and writes headered CSVs
plus ``manifest.json`` into the output directory::

    qptc ising-fs --L 64,128 --out results/ising
    qptc vqe-zzxz --config runs/zzxz.ini --jobs 4
    qptc --selftest
"""
from __future__ import annotations

import argparse
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import SCHEMAS, ConfigError, RunConfig, load_config
from .io import Manifest, read_csv, write_csv, write_json

__all__ = ["main", "build_parser", "run"]


# worker pool -----------------------------------------------------------------------

def _workers(cfg: RunConfig) -> int:
    n = cfg.values.get("jobs", 0)
    if n:
        return n
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover
        return os.cpu_count() or 1


def _map(cfg: RunConfig, fn, cells):
    """Evaluate ``fn`` over ``cells`` in a process pool; results keep cell order."""
    cells = list(cells)
    n = min(_workers(cfg), len(cells))
    if n <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, cells))


def _grid(lo, hi, step):
    n = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(n + 1), 12)


# Ising ------------------------------------------------------------------------------

def _ising_cell(args):
    from . import ising

    L, grid, J_R = args
    g = ising.metric_finite(grid, L, per_site=True)
    rt = np.sqrt(g)
    cfs = np.r_[0.0, np.cumsum(0.5 * (rt[1:] + rt[:-1]) * np.diff(grid))]
    cn = ising.nielsen_angle_complexity(J_R, grid, L, per_site=True)
    dcn = ising.nielsen_angle_derivative(J_R, grid, L, per_site=True)
    return L, g, rt, cfs, cn, dcn


def _ising_rows(cfg, man, out):
    grid = _grid(cfg.J_min, cfg.J_max, cfg.dJ)
    rows = []
    for L, g, rt, cfs, cn, dcn in _map(cfg, _ising_cell, [(L, grid, cfg.J_R) for L in cfg.L]):
        rows += [(J, L, a, b, c, b, d, e) for J, a, b, c, d, e in zip(grid, g, rt, cfs, cn, dcn)]
    man.add(write_csv(out / "ising.csv",
                      ["J", "L", "g_JJ_per_site", "sqrt_g_per_site", "C_FS_per_site", "dCFS_dJ",
                       "C_N_per_site", "dCN_dJ"], rows))


def run_ising_fs(cfg, man, out):
    from .scaling import exponent_check_ising, ising_fs_peaks

    _ising_rows(cfg, man, out)
    peaks = ising_fs_peaks(cfg.fit_L)
    man.add(write_csv(out / "peaks.csv", ["L", "J_max", "dCFS_dJ_max", "refinement_error", "edge"],
                      [(p.N, p.x_max, p.y_max, p.refinement_error, p.edge) for p in peaks]))
    fit = exponent_check_ising(cfg.fit_L)
    man.add(write_json(out / "fit.json", {"observable": "max dC_FS/dJ per site", **fit.to_dict(),
                                          "exponent": fit.exponent}))


def run_ising_nielsen(cfg, man, out):
    from .scaling import fit_scaling, ising_nielsen_peaks

    _ising_rows(cfg, man, out)
    peaks = ising_nielsen_peaks(cfg.fit_L, J_R=cfg.J_R)
    man.add(write_csv(out / "peaks.csv", ["L", "J_max", "dCN_dJ_max", "refinement_error", "edge"],
                      [(p.N, p.x_max, p.y_max, p.refinement_error, p.edge) for p in peaks]))
    fit = fit_scaling([p.N for p in peaks], [p.y_max for p in peaks], "linear_log")
    man.add(write_json(out / "fit.json", {"observable": "max dC_N/dJ per site", **fit.to_dict()}))


# Dicke ------------------------------------------------------------------------------

def _dicke_cell(args):
    from .dicke import dicke_metric_finite
    from .models import CutoffWarning

    N, grid, wc, ws, n_exc = args
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", CutoffWarning)
        samples = dicke_metric_finite(N, grid, wc, ws, n_exc)
    n_warn = sum(issubclass(w.category, CutoffWarning) for w in caught)
    return N, [(s.lam, s.g) for s in samples], n_warn


def run_dicke(cfg, man, out):
    from .dicke import critical_coupling, dicke_metric_thermo
    from .scaling import find_peak, fit_scaling

    grid = _grid(cfg.lam_min, cfg.lam_max, cfg.dlam)
    lam_c = critical_coupling(cfg.omega_c, cfg.omega_s)
    rows, peaks = [], []
    cells = [(N, grid, cfg.omega_c, cfg.omega_s, cfg.n_exc) for N in cfg.N]
    for N, samples, n_warn in _map(cfg, _dicke_cell, cells):
        lam = np.array([s[0] for s in samples])
        g = np.array([s[1] for s in samples])
        rows += [(x, N, y, np.sqrt(y)) for x, y in zip(lam, g)]
        pk = find_peak(lam, np.sqrt(g), N)
        peaks.append(pk)
        if n_warn:
            man.notes.append(f"N={N}: {n_warn} ground states with population above tolerance in the top boson level")
    man.add(write_csv(out / "dicke_finite.csv", ["lambda", "N", "g", "sqrt_g"], rows))
    keep = np.abs(grid - lam_c) > 2 * cfg.thermo_step
    thermo = dicke_metric_thermo(grid[keep], cfg.omega_c, cfg.omega_s, cfg.thermo_step)
    man.add(write_csv(out / "dicke_thermo.csv", ["lambda", "g", "sqrt_g", "phase"],
                      [(s.lam, s.g, s.sqrt_g, "normal" if s.lam < lam_c else "superradiant") for s in thermo]))
    man.add(write_csv(out / "peaks.csv", ["N", "lambda_max", "sqrt_g_max", "refinement_error", "edge"],
                      [(p.N, p.x_max, p.y_max, p.refinement_error, p.edge) for p in peaks]))
    report = {"lambda_c": lam_c}
    if len(peaks) >= 4:
        Ns = [p.N for p in peaks]
        report["position"] = fit_scaling(Ns, [p.x_max for p in peaks], "position").to_dict()
        report["height"] = fit_scaling(Ns, [p.y_max for p in peaks], "power_offset").to_dict()
    else:
        man.notes.append("fewer than four sizes: scaling fits skipped")
    man.add(write_json(out / "fit.json", report))


# adiabatic --------------------------------------------------------------------------

def _problem(spec):
    from .adiabatic import field_ramp_problem, tfi_problem, zzxz_problem
    from .models import TfiParams, ZzxzParams

    kind, kw = spec
    if kind == "tfi":
        return tfi_problem(TfiParams(**kw))
    if kind == "ramp_hx":
        return field_ramp_problem(TfiParams(**kw))
    variant = kw.pop("variant", "local")
    return zzxz_problem(ZzxzParams(**kw), variant)


def _adiabatic_cell(args):
    from .adiabatic import evolve, minimal_time_scan

    spec, label, T_grid, threshold, trace_T, samples = args
    prob = _problem((spec[0], dict(spec[1])))
    out = {}
    for cd in (True, False):
        scan = minimal_time_scan(prob, T_grid, threshold=threshold, with_cd=cd, stop_early=False)
        tr = evolve(prob, trace_T, with_cd=cd, n_samples=samples)
        out[cd] = (scan, tr.times, tr.lam, tr.fidelity_inst, tr.gap)
    return label, prob.nsites, out


def _run_adiabatic(cfg, man, out, cells):
    from .adiabatic import geometric_grid

    T_grid = geometric_grid(cfg.T_min, cfg.T_max, cfg.T_per_decade)
    args = [(spec, label, T_grid, cfg.threshold, cfg.trace_T, cfg.samples) for spec, label in cells]
    fid_rows, sum_rows, tr_rows = [], [], []
    for (path, x), L, res in _map(cfg, _adiabatic_cell, args):
        for cd, (scan, times, lam, finst, gap) in res.items():
            fid_rows += [(path, L, x, cd, T, f) for T, f in zip(scan.T_grid, scan.fidelities)]
            cn = scan.C_N
            sum_rows.append((path, L, x, cd, scan.T_star, cn, None if cn is None else cn / L,
                             scan.best_fidelity, scan.reached))
            tr_rows += [(path, L, x, cd, cfg.trace_T, t, a, f, g) for t, a, f, g in zip(times, lam, finst, gap)]
    man.add(write_csv(out / "fidelity_vs_T.csv", ["path", "L", "target", "with_cd", "T", "fidelity"], fid_rows))
    man.add(write_csv(out / "summary.csv", ["path", "L", "target", "with_cd", "T_star", "C_N", "C_N_per_site",
                                            "best_fidelity", "reached"], sum_rows))
    man.add(write_csv(out / "traces.csv", ["path", "L", "target", "with_cd", "T", "t", "lambda",
                                           "fidelity_inst", "gap"], tr_rows))


def run_adiabatic_tfi(cfg, man, out):
    cells = [(("tfi", {"L": L, "J": J, "h_x": cfg.h_x, "boundary": cfg.boundary}), ("ramp_J", J))
             for L in cfg.L for J in cfg.J]
    _run_adiabatic(cfg, man, out, cells)


def run_adiabatic_zzxz(cfg, man, out):
    cells = [(("zzxz", {"L": L, "J": J, "h_x": cfg.h_x, "h_z": cfg.h_z, "boundary": cfg.boundary,
                        "variant": cfg.cd_basis}), ("ramp_J", J))
             for L in cfg.L for J in cfg.J]
    _run_adiabatic(cfg, man, out, cells)


def run_adiabatic_alt(cfg, man, out):
    if cfg.mode == "ramp_hx":
        cells = [(("ramp_hx", {"L": L, "J": J, "h_x": hx, "boundary": cfg.boundary}), ("ramp_hx", hx))
                 for L in cfg.L for J in cfg.J for hx in cfg.h_x]
    elif cfg.mode == "ramp_J":
        cells = [(("tfi", {"L": L, "J": J, "h_x": hx, "boundary": cfg.boundary}), ("ramp_J", J))
                 for L in cfg.L for J in cfg.J for hx in cfg.h_x]
    else:
        cells = [(("zzxz", {"L": L, "J": J, "h_x": 1.0, "h_z": cfg.h_z, "boundary": cfg.boundary}), ("zzxz", J))
                 for L in cfg.L for J in cfg.J]
    _run_adiabatic(cfg, man, out, cells)


# VQE --------------------------------------------------------------------------------

def _vqe_cell(args):
    from .models import TfiParams, ZzxzParams, build_tfi, build_zzxz
    from .vqe import afm_diagnostics, depth_scan, exact_spectrum, _matrix

    kind, kw, opts = args
    h = build_tfi(TfiParams(**kw)) if kind == "tfi" else build_zzxz(ZzxzParams(**kw))
    results = depth_scan(h, **opts)
    diag = afm_diagnostics(results[-1], h, exact_spectrum(_matrix(h))) if kind == "zzxz" else None
    return kw["J"], results, diag


def _run_vqe(cfg, man, out, kind, base):
    opts = {"d_max": cfg.d_max, "threshold": cfg.threshold, "seed": cfg.seed, "restarts": cfg.restarts}
    cells = [(kind, {**base, "J": J}, opts) for J in cfg.J]
    rows, best, mags = [], [], []
    for J, results, diag in _map(cfg, _vqe_cell, cells):
        for r in results:
            rows.append((J, r.L, r.layers, r.fidelity, r.subspace_fidelity, r.energy, r.exact_energies[0],
                         r.energy_accuracy, r.C_N, r.C_N_per_site, r.converged, r.restarts, r.nit, r.stagnated))
        r = results[-1]
        best.append((J, r.L, r.layers, r.converged, r.fidelity, r.subspace_fidelity, r.energy_accuracy,
                     r.C_N, r.C_N_per_site))
        if diag is not None:
            mags += [(J, i, diag.sigma_z[i], diag.occupation[i], diag.exact_occupation[i])
                     for i in range(r.L)]
    man.add(write_csv(out / "vqe_depths.csv",
                      ["J", "L", "d", "fidelity", "subspace_fidelity", "energy", "exact_energy",
                       "energy_accuracy", "C_N", "C_N_per_site", "converged", "restarts", "nit", "stagnated"], rows))
    man.add(write_csv(out / "vqe_summary.csv",
                      ["J", "L", "d", "converged", "fidelity", "subspace_fidelity", "energy_accuracy", "C_N",
                       "C_N_per_site"], best))
    if mags:
        man.add(write_csv(out / "magnetization.csv",
                          ["J", "site", "sigma_z", "occupation", "exact_occupation"], mags))


def run_vqe_tfi(cfg, man, out):
    _run_vqe(cfg, man, out, "tfi", {"L": cfg.L, "h_x": cfg.h_x, "bias": cfg.bias, "boundary": "open"})


def run_vqe_zzxz(cfg, man, out):
    _run_vqe(cfg, man, out, "zzxz", {"L": cfg.L, "h_x": cfg.h_x, "h_z": cfg.h_z, "boundary": "open"})


# scaling ----------------------------------------------------------------------------

def run_scaling_fit(cfg, man, out):
    from .io import file_digest
    from .scaling import fit_scaling

    path = Path(cfg.input)
    if not path.exists():
        raise ConfigError("input", f"file not found: {path}")
    cols = read_csv(path)
    for key in ("size_column", "value_column"):
        name = cfg.values[key]
        if name not in cols or not isinstance(cols[name], np.ndarray):
            raise ConfigError(key, f"no numeric column {name!r} in {path}")
    x_c = float(cfg.x_c) if cfg.x_c not in ("", None) else None
    fit = fit_scaling(cols[cfg.size_column], cols[cfg.value_column], cfg.law, x_c=x_c)
    man.add(write_json(out / "fit.json", {**fit.to_dict(), "exponent": fit.exponent,
                                          "exponent_error": fit.exponent_error,
                                          "input": str(path), "input_sha256": file_digest(path)}))


RUNNERS = {
    "ising-fs": run_ising_fs,
    "ising-nielsen": run_ising_nielsen,
    "dicke": run_dicke,
    "adiabatic-tfi": run_adiabatic_tfi,
    "adiabatic-zzxz": run_adiabatic_zzxz,
    "adiabatic-alt": run_adiabatic_alt,
    "vqe-tfi": run_vqe_tfi,
    "vqe-zzxz": run_vqe_zzxz,
    "scaling-fit": run_scaling_fit,
}


# front end --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qptc", description="Circuit complexity near quantum phase transitions.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--selftest", action="store_true", help="run the oracle suite and exit")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: available parallelism)")
    sub = p.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name, help=RUNNERS[name].__name__.replace("run_", "").replace("_", " "))
        sp.add_argument("--config", help="INI-style run configuration")
        sp.add_argument("--out", dest="output_dir", default=None, help=schema["output_dir"].help)
        for key, opt in schema.items():
            if key == "output_dir":
                continue
            if key == "jobs":
                sp.add_argument("--jobs", dest="sub_jobs", type=int, default=None, help=opt.help)
                continue
            flag = "--" + key.replace("_", "-")
            extra = f" [{', '.join(opt.choices)}]" if opt.choices else ""
            default = ",".join(map(str, opt.default)) if isinstance(opt.default, list) else opt.default
            sp.add_argument(flag, dest=key, default=None, metavar=opt.kind.upper(),
                            help=f"{opt.help}{extra} (default: {default!s})")
    return p


def run(subcommand: str, cfg: RunConfig) -> Path:
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    man = Manifest(subcommand, cfg.canonical()["values"], cfg.digest(), {"seed": cfg.values.get("seed", 0)})
    RUNNERS[subcommand](cfg, man, out)
    return man.write(out)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.selftest:
        from .selftest import run_selftest

        return run_selftest()
    if not args.subcommand:
        parser.print_usage(sys.stderr)
        return 2
    ns = vars(args)
    overrides = {k: ns[k] for k in SCHEMAS[args.subcommand] if k != "jobs" and ns.get(k) is not None}
    jobs = ns.get("sub_jobs") if ns.get("sub_jobs") is not None else args.jobs
    if jobs is not None:
        overrides["jobs"] = jobs
    try:
        cfg = load_config(args.subcommand, ns.get("config"), overrides)
        manifest = run(args.subcommand, cfg)
    except ConfigError as exc:
        print(f"qptc {args.subcommand}: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"qptc {args.subcommand}: {exc}", file=sys.stderr)
        return 2
    print(manifest)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
