"""Command-line drivers: ``sdapk {solve,stability,cond,filter-error,eoc-study}``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from sdapk.apk import ApkBasis, ApkParams
from sdapk.config import ConfigError, RunConfig, load_config
from sdapk.filters import FilterProfile, error_study
from sdapk.geometry import build_pattern_grid, build_ref_nodes, read_mesh
from sdapk.sd import (FilterSettings, SolveConfig, advection_problem, burgers_problem,
                      build_ops, eoc, monomial_vandermonde_cond, solve)
from sdapk.stability import StabilityCase, StabilityConstants, default_cases, frange, parameter_grid, sweep

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2

TEST_FUNCTIONS = {
    "sine": lambda x, y: np.sin(np.pi * (x + y)),
    "poly2": lambda x, y: x * y + x ** 2 - 0.5 * y + 0.25,
}


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if v != v else repr(v)
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _params(b) -> ApkParams:
    return ApkParams(b.alpha, b.beta, b.gamma)


# --------------------------------------------------------------------------


def cmd_solve(cfg: RunConfig, out: Path, timing: bool = True) -> int:
    pc, tc = cfg.problem, cfg.time
    if pc.name == "advection":
        prob = advection_problem(pc.psi, pc.speed, tc.t_end)
        if not pc.exact:
            prob = prob.__class__(**{**prob.__dict__, "exact": None})
    else:
        prob = burgers_problem(tc.t_end)
    mesh = read_mesh(cfg.mesh.file) if cfg.mesh.file else build_pattern_grid(cfg.mesh.n_blocks or 4)
    fc = cfg.filter
    fs = None
    if fc.enabled:
        fs = FilterSettings(fc.p, fc.c, fc.gamma_filter, fc.use_indicator, fc.threshold, fc.apply, fc.kind)
    scfg = SolveConfig(tc.C_fix, fs, pc.tangential, tc.snapshot_every, tc.blowup_limit)
    res = solve(prob, mesh, _params(cfg.basis), cfg.basis.N, scfg)

    diag_rows = [(d.t, d.min, d.max, d.L1, d.L2, d.Linf, d.wall_ms if timing else 0.0)
                 for d in res.diagnostics]
    _write_csv(out / "diagnostics.csv", ["t", "min", "max", "L1", "L2", "Linf", "wall_ms"], diag_rows)
    xy = res.coupling.sol_xy
    for i, (t, U) in enumerate(res.snapshots):
        rows = [(c, xy[c, j, 0], xy[c, j, 1], U[c, j])
                for c in range(U.shape[0]) for j in range(U.shape[1])]
        _write_csv(out / f"snapshot_{i:04d}.csv", ["cell_id", "point_x", "point_y", "u"], rows)
    if res.blowup is not None:
        report = {**asdict(res.blowup), "dt": res.dt}
        (out / "blowup.json").write_text(json.dumps(report, indent=2) + "\n")
        print(f"blow-up at step {res.blowup.step} (last finite t = {res.blowup.t_last_finite:.6g}, "
              f"cell {res.blowup.cell}): {res.blowup.reason}", file=sys.stderr)
        return EXIT_BLOWUP
    last = res.diagnostics[-1]
    print(f"reached t = {res.t:.6g} in {res.steps} steps (dt = {res.dt:.4g}); "
          f"min {last.min:.6g}, max {last.max:.6g}, Linf error {last.Linf:.4g}")
    return EXIT_OK


def _cases(sc) -> list[StabilityCase]:
    base = default_cases()
    psis = sc.cases.psi if sc.cases.psi is not None else sorted({c.psi for c in base})
    wxs = sc.cases.wx if sc.cases.wx is not None else sorted({c.wx for c in base})
    wys = sc.cases.wy if sc.cases.wy is not None else sorted({c.wy for c in base})
    return [StabilityCase(p, a, b) for p in psis for a in wxs for b in wys]


def cmd_stability(cfg: RunConfig, out: Path) -> int:
    sc = cfg.stability
    cases = _cases(sc)
    if sc.tuples is not None:
        tuples = [ApkParams(*t) for t in sc.tuples]
    elif sc.grid is not None:
        g = sc.grid
        tuples = parameter_grid(frange(*g.alpha), frange(*g.beta), g.gamma_max, g.gamma_step)
    else:
        tuples = [_params(cfg.basis)]
    filters = [None] if sc.filters is None else [(f.p, f.c) for f in sc.filters]
    consts = StabilityConstants(sc.constants.h, sc.constants.C_fix, sc.constants.lambda_max)
    ck = Path(sc.checkpoint) if sc.checkpoint else out / "sweep.ckpt.jsonl"
    results = sweep(sc.N, tuples, filters, cases, sc.gamma_filter, consts, sc.rule, sc.path,
                    sc.backend, ck)
    header = ["alpha", "beta", "gamma", "p", "c", "L", "argmax_psi", "argmax_wx", "argmax_wy"]
    rows = [(r.alpha, r.beta, r.gamma, r.p, r.c, r.L, r.argmax_psi, r.argmax_wx, r.argmax_wy)
            for r in results]
    _write_csv(out / "sweep.csv", header, rows)
    best = min(results, key=lambda r: r.L)
    _write_csv(out / "summary.csv", header,
               [(best.alpha, best.beta, best.gamma, best.p, best.c, best.L,
                 best.argmax_psi, best.argmax_wx, best.argmax_wy)])
    print(f"N = {sc.N}: best L = {best.L:.7g} at (alpha, beta, gamma) = "
          f"({best.alpha:g}, {best.beta:g}, {best.gamma:g})")
    return EXIT_OK


def cmd_cond(cfg: RunConfig, out: Path) -> int:
    cc = cfg.cond
    Ns = range(cc.N_min, cc.N_max + 1)
    rows = []
    for t in cc.params:
        prm = ApkParams(*t)
        for N in Ns:
            rows.append(("apk", *t, N, build_ops(prm, N).cond))
    if cc.lagrange:
        for N in Ns:
            rows.append(("lagrange", "", "", "", N, monomial_vandermonde_cond(N)))
    _write_csv(out / "cond.csv", ["basis", "alpha", "beta", "gamma", "N", "kappa"], rows)
    for r in rows:
        print(f"{r[0]:9s} {r[1]!s:>4} {r[2]!s:>4} {r[3]!s:>4}  N={r[4]:2d}  kappa={r[5]:.4g}")
    return EXIT_OK


def cmd_filter_error(cfg: RunConfig, out: Path) -> int:
    fe = cfg.filter_error
    f = TEST_FUNCTIONS[fe.function]
    fk = fe.filter
    prof = FilterProfile(fk.kind, strength=fk.strength, order=fk.order)
    rows = error_study(f, ApkParams(*fe.params), lambda N: prof, range(fe.N_min, fe.N_max + 1),
                       fe.regions, fe.samples, fe.signed, fe.rate)
    header = ["N", "region", "max_error", "x", "y", "fitted_exponent", "fitted_constant"]
    _write_csv(out / "error_study.csv", header,
               [(r.N, r.region, r.max_error, r.x, r.y, r.fitted_exponent, r.fitted_constant)
                for r in rows])
    with (out / "max_error.dat").open("w") as fh:
        for region in fe.regions:
            fh.write(f"# region {region}\n# N max_error\n")
            for r in rows:
                if r.region == region:
                    fh.write(f"{r.N} {r.max_error!r}\n")
            fh.write("\n\n")
    (out / "max_error.gp").write_text(
        "set logscale xy\nset xlabel 'N'\nset ylabel 'max error'\n"
        "plot for [i=0:*] 'max_error.dat' index i using 1:2 with linespoints title columnhead(1)\n")
    for r in rows:
        print(f"{r.region:9s} N={r.N:2d} max_error={r.max_error:.6g} at ({r.x:.3f}, {r.y:.3f})")
    return EXIT_OK


def cmd_eoc_study(cfg: RunConfig, out: Path) -> int:
    ec = cfg.eoc_study
    prm = _params(cfg.basis)
    prob = advection_problem(ec.psi, ec.speed, ec.t_end)
    table = {}
    hs = {}
    for nb in ec.n_blocks:
        mesh = build_pattern_grid(nb)
        hs[nb] = float(np.min(mesh.min_edge_lengths()))
        for N in ec.N_values:
            res = solve(prob, mesh, prm, N, SolveConfig(C_fix=ec.C_fix))
            table[(nb, N)] = (mesh.n_cells, res.diagnostics[-1])
    rows = []
    for N in ec.N_values:
        for i, nb in enumerate(ec.n_blocks):
            cells, d = table[(nb, N)]
            eoc_k = (eoc([table[(ec.n_blocks[i - 1], N)][1].Linf, d.Linf],
                         [1 / hs[ec.n_blocks[i - 1]], 1 / hs[nb]])[0] if i else float("nan"))
            j = ec.N_values.index(N)
            eoc_n = (eoc([table[(nb, ec.N_values[j - 1])][1].Linf, d.Linf],
                         [ec.N_values[j - 1], N])[0] if j else float("nan"))
            rows.append((N, cells, hs[nb], d.Linf, d.L1, d.L2, eoc_k, eoc_n))
    _write_csv(out / "eoc.csv", ["N", "cells", "h", "Linf", "L1", "L2", "EOC_k", "EOC_N"], rows)
    for r in rows:
        print(f"N={r[0]} k={r[1]:5d} Linf={r[3]:.6e} EOC(k)={r[6]:.3f} EOC(N)={r[7]:.3f}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "stability": cmd_stability,
    "cond": cmd_cond,
    "filter-error": cmd_filter_error,
    "eoc-study": cmd_eoc_study,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sdapk", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", nargs="?", help="JSON config (defaults when omitted)")
        p.add_argument("-o", "--out", default=".", help="output directory")
        if name == "solve":
            p.add_argument("--no-timing", action="store_true",
                           help="write 0 in the wall_ms column for reproducible files")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "solve":
            return cmd_solve(cfg, out, timing=not args.no_timing)
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
