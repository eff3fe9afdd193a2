"""Command-line entry point: experiment orchestration and result export.

Subcommands: solve <config>, validate-e1, validate-operator <config>,
report <dir>.  Exit codes: 0 ok, 1 solver non-convergence, 2 config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .cross_section import model_from_config
from .collision_operator import (AngularQuadrature, apply_L, assemble_operator,
                                 collision_invariants, norm_star, smoothing_report)
from .moments import (MomentIndex, analyze_singularity, d_moment_dx, moment,
                      macroscopic_variables)
from .slab_solver import (BOUNDARY_PRESETS, BoundaryData, SlabConfig, make_x_grid,
                          solve, temperature_step_boundary)
from .special_functions import e1_bounds, exp_integral_E1
from .velocity_grid import make_grid

EXIT_OK = 0
EXIT_NO_CONVERGENCE = 1
EXIT_CONFIG = 2


def _build_boundary(cfg: RunConfig):
    if cfg.boundary == "maxwellian":
        bc = BOUNDARY_PRESETS["maxwellian"]()
    elif cfg.boundary == "temperature_step":
        bc = temperature_step_boundary(cfg.boundary_T0)
    elif cfg.boundary.startswith("file:"):
        bc = _boundary_from_file(cfg.boundary[5:])
    else:
        raise ConfigError(f"unknown boundary {cfg.boundary!r}")
    bc.grad_p = cfg.grad_p
    return bc


def _boundary_from_file(path: str) -> BoundaryData:
    """Tabulated incoming data: rows zeta1 zeta_r value, interpolated linearly."""
    from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator

    data = np.loadtxt(path)
    if data.ndim != 2 or data.shape[1] != 3:
        raise ConfigError(f"{path}: expected three columns (zeta1, zeta_r, value)")
    pts, vals = data[:, :2], data[:, 2]
    lin = LinearNDInterpolator(pts, vals)
    near = NearestNDInterpolator(pts, vals)

    def interp(z1, zr):
        z1 = np.asarray(z1, dtype=float)
        out = lin(z1, np.asarray(zr, dtype=float))
        bad = np.isnan(out)
        if np.any(bad):
            out[bad] = near(z1[bad], np.asarray(zr, dtype=float)[bad])
        return out

    return BoundaryData(
        f_in=lambda z1, zr: interp(z1, zr),
        f_out=lambda z1, zr: interp(z1, zr),
        name=f"file:{path}",
    )


def build_pipeline(cfg: RunConfig):
    """(model, grid, operator, slab config, boundary) from a validated config."""
    model = model_from_config(
        cfg.cross_section, gamma=cfg.gamma, cutoff_const=cfg.cutoff_const,
        table_path=cfg.beta_table or None,
    )
    grid = make_grid(
        n_zeta1=cfg.n_zeta1, n_zeta_r=cfg.n_zeta_r, zeta_max=cfg.zeta_max,
        min_frac=cfg.min_zeta1_frac, azimuthal_order=cfg.azimuthal_order,
    )
    angular = AngularQuadrature(
        n_phi=cfg.azimuthal_order, n_theta=cfg.n_theta, n_eps=cfg.n_eps,
        core_speed_frac=None if cfg.core_speed_frac <= 0 else cfg.core_speed_frac,
    )
    op = assemble_operator(model, grid, angular)
    slab = SlabConfig(
        l=cfg.l,
        x_nodes=make_x_grid(cfg.l, cfg.x_coarse, cfg.dyadic_k_min, cfg.dyadic_k_max),
        tol=cfg.tol, max_iter=cfg.max_iter, relaxation=cfg.relaxation,
    )
    bc = _build_boundary(cfg)
    return model, grid, op, slab, bc


def run_experiment(cfg: RunConfig, quiet: bool = False) -> int:
    """Solve, analyze each configured moment, write artifacts.

    Returns the process exit code; nothing is written when the config is
    invalid, and a diagnostic report is still produced when the iteration
    fails to converge.
    """
    cfg.validate()
    t_start = time.time()
    model, grid, op, slab, bc = build_pipeline(cfg)
    f = solve(bc, op, slab)

    ks = range(cfg.fit_k_min, cfg.fit_k_max + 1)
    reports = []
    if f.converged:
        for alpha in cfg.moments:
            reports.append(analyze_singularity(f, bc, op, alpha, ks=ks))
    sm = smoothing_report(op, seed=cfg.seed)

    inv_defect = {}
    for name, psi in collision_invariants(grid).items():
        ns = norm_star(psi, op)
        inv_defect[name] = norm_star(apply_L(op, psi), op) / ns if ns > 0 else 0.0

    results = {
        "version": __version__,
        "config": cfg.echo(),
        "converged": bool(f.converged),
        "residual_history": [float(r) for r in f.residual_history],
        "fixed_point_residual": float(f.fixed_point_residual),
        "nu0_fit": float(op.nu0_fit),
        "nu1_fit": float(op.nu1_fit),
        "mass_defect": float(grid.mass_defect),
        "smoothing_c1": float(sm.c1),
        "smoothing_c2": {str(a): float(v) for a, v in sm.c2.items()},
        "invariant_defects": inv_defect,
        "boundary_metadata": bc.regularity_metadata(grid),
        "reports": [
            {
                "alpha": list(r.alpha.alpha),
                "a_alpha": r.alpha.a_alpha,
                "c_theory": r.c_theory,
                "b_fit": r.b_fit,
                "a_fit": r.a_fit,
                "b_fit_abs": r.b_fit_abs,
                "fit_residual": r.fit_residual,
                "i_route_limit": r.i_route_limit,
                "x_range": list(r.x_range),
                "rho0_values": [float(v) for v in r.rho0_values],
                "extrapolation_unstable": bool(r.extrapolation_unstable),
                "samples": [[float(x), float(d)] for x, d in r.samples],
            }
            for r in reports
        ],
        "runtime_seconds": None,   # filled in export
        "versions": _versions(),
    }
    if not f.converged:
        results["error"] = {
            "code": "solver_non_convergence",
            "message": ("source iteration stalled; the slab may be too thick "
                        "or the grid too coarse"),
            "last_residual": float(f.residual_history[-1]) if f.residual_history else None,
        }

    results["runtime_seconds"] = round(time.time() - t_start, 3)
    export_results(results, cfg.output_dir, field=f, bc=bc, op=op, cfg=cfg)
    if not quiet:
        status = "ok" if f.converged else "NOT CONVERGED"
        print(f"run {status}: {len(reports)} moment reports -> {cfg.output_dir}")
        for r in reports:
            print(f"  alpha={r.alpha.alpha}: b_fit={r.b_fit:.6f} "
                  f"c_theory={r.c_theory:.6f} residual={r.fit_residual:.2e}")
    return EXIT_OK if f.converged else EXIT_NO_CONVERGENCE


def _versions() -> dict:
    import numba
    import scipy

    return {
        "boltzslab": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def export_results(results: dict, out_dir: str, field=None, bc=None, op=None,
                   cfg=None) -> None:
    """moments.csv + report.json (+ nothing else unless asked)."""
    os.makedirs(out_dir, exist_ok=True)
    if field is not None and cfg is not None and results.get("converged", True):
        _write_moments_csv(os.path.join(out_dir, "moments.csv"),
                           field, bc, op, cfg)
    payload = dict(results)
    payload["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_moments_csv(path, field, bc, op, cfg) -> None:
    alphas = [MomentIndex(tuple(a)) for a in cfg.moments]
    header = ["x"]
    for a in alphas:
        tag = "".join(str(k) for k in a.alpha)
        header += [f"sigma_{tag}", f"dsigma_dx_{tag}"]
    xs = field.x_nodes
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, x in enumerate(xs):
            row = [f"{x:.16g}"]
            for a in alphas:
                s = moment(field, a, i)
                if 0.0 < x < xs[-1]:
                    d = d_moment_dx(field, bc, op, a, float(x))
                    row += [f"{s:.16g}", f"{d:.16g}"]
                else:
                    row += [f"{s:.16g}", "nan"]
            w.writerow(row)


def validate_e1(out_dir: str | None = None, n_samples: int = 1000) -> dict:
    """Sweep E1 over log-spaced arguments; check the two-sided envelope and
    monotonicity; optionally write e1_validation.csv."""
    xs = np.geomspace(1e-6, 50.0, n_samples)
    rows = []
    ok_bounds = True
    ok_mono = True
    prev = None
    for x in xs:
        r = exp_integral_E1(float(x))
        lo, hi = e1_bounds(float(x))
        if not lo <= r.value <= hi:
            ok_bounds = False
        if prev is not None and not r.value < prev:
            ok_mono = False
        prev = r.value
        rows.append((x, r.value, r.branch, lo, hi))
    small = exp_integral_E1(1e-6)
    ratio = small.value / (-math.log(1e-6))
    out = {
        "n_samples": n_samples,
        "bounds_hold": ok_bounds,
        "strictly_decreasing": ok_mono,
        "ratio_to_minus_log_at_1e-6": ratio,
    }
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "e1_validation.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "E1", "branch", "lower_bound", "upper_bound"])
            for row in rows:
                w.writerow([f"{row[0]:.16g}", f"{row[1]:.16g}", row[2],
                            f"{row[3]:.16g}", f"{row[4]:.16g}"])
    return out


def validate_operator(cfg: RunConfig) -> dict:
    """Assemble and report the operator's structural properties."""
    cfg.validate()
    model, grid, op, _, _ = build_pipeline(cfg)
    rng = np.random.default_rng(cfg.seed)
    inv = {}
    for name, psi in collision_invariants(grid).items():
        ns = norm_star(psi, op)
        inv[name] = norm_star(apply_L(op, psi), op) / ns if ns > 0 else 0.0
    sym = float(np.max(np.abs(op.K - op.K.T)) / np.max(np.abs(op.K)))
    worst = -np.inf
    for _ in range(64):
        v = rng.normal(size=grid.n_nodes)
        v /= math.sqrt(float(np.sum(grid.weights * v * v)))
        lv = apply_L(op, v)
        worst = max(worst, float(np.sum(grid.weights * lv * v)))
    sm = smoothing_report(op, seed=cfg.seed)
    return {
        "invariant_defects": inv,
        "kernel_asymmetry": sym,
        "max_dissipativity_quotient": worst,
        "nu0_fit": op.nu0_fit,
        "nu1_fit": op.nu1_fit,
        "smoothing_c1": sm.c1,
        "smoothing_c2": {str(a): v for a, v in sm.c2.items()},
        "mass_defect": grid.mass_defect,
    }


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="boltzslab")
    sub = parser.add_subparsers(dest="command", required=True)
    p_solve = sub.add_parser("solve", help="run the full experiment pipeline")
    p_solve.add_argument("config")
    p_e1 = sub.add_parser("validate-e1", help="exponential-integral validation sweep")
    p_e1.add_argument("--out", default="results")
    p_e1.add_argument("--samples", type=int, default=1000)
    p_op = sub.add_parser("validate-operator", help="operator property report")
    p_op.add_argument("config")
    p_rep = sub.add_parser("report", help="pretty-print a stored report")
    p_rep.add_argument("dir")
    args = parser.parse_args(argv)

    try:
        if args.command == "solve":
            cfg = load_config(args.config)
            return run_experiment(cfg)
        if args.command == "validate-e1":
            out = validate_e1(args.out, args.samples)
            print(json.dumps(out, indent=2, sort_keys=True))
            return EXIT_OK if out["bounds_hold"] and out["strictly_decreasing"] else EXIT_NO_CONVERGENCE
        if args.command == "validate-operator":
            cfg = load_config(args.config)
            print(json.dumps(validate_operator(cfg), indent=2, sort_keys=True))
            return EXIT_OK
        if args.command == "report":
            with open(os.path.join(args.dir, "report.json")) as fh:
                rep = json.load(fh)
            print(json.dumps(rep, indent=2, sort_keys=True))
            return EXIT_OK
    except ConfigError as exc:
        print(f"configuration error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
