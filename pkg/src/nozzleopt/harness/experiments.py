"""Experiment drivers: operating-point sweeps and flow-field galleries.

A sweep runs, for every operating point, a baseline 30-degree solve and a
shape optimization on the same mesh policy, then writes one CSV row per
point plus per-point field files. Points are independent and may run on a
thread pool; rows are always written sorted by sweep key so re-runs with
the same seed reproduce the CSV byte for byte. Timestamps live in a
separate metadata file.
"""

from __future__ import annotations

import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from ..errors import NozzleOptError
from ..geometry import AngleParams, build_profile
from ..meshing import generate_mesh, write_vtk
from ..objective import pressure_drop, relative_improvement
from ..optimizer import optimize_angle, optimize_spline
from ..solver import BoundaryConditions, solve_gnf, solve_viscoelastic
from .config import ExperimentConfig

BASELINE_ALPHA = 30.0
PRESSURE_UNIT = "kPa"

SWEEP_COLUMNS = [
    "u_in_mm_s", "d_out_mm", "parametrization", "alpha_opt_deg",
    "spline_y_ctrl_mm", "dp_baseline", "dp_opt", "pressure_unit",
    "improvement", "n_vortices_opt", "status", "error",
]

GALLERY_COLUMNS = [
    "alpha_deg", "dp", "pressure_unit", "n_vortices", "vortex",
    "mass_balance_error", "status", "error",
]


def _solve(cfg: ExperimentConfig, dims, bc, params):
    """Mesh and solve one design under the configured model."""
    profile = build_profile(dims, params, n_ctrl=cfg.n_ctrl, degree=cfg.degree)
    mesh = generate_mesh(profile, h=cfg.mesh_h, grading=cfg.mesh_grading)
    if cfg.model == "viscoelastic":
        sol = solve_viscoelastic(mesh, bc, cfg.giesekus, cfg.solver)
    else:
        sol = solve_gnf(mesh, bc, cfg.cross_wlf, cfg.solver)
    report = pressure_drop(sol, mesh, dims, cfg.solver_mode)
    return profile, mesh, sol, report


def _field_data(sol):
    data = {"u": sol.u, "p": sol.p}
    if sol.T is not None:
        data["T"] = sol.T
    if sol.sigma_p is not None:
        data["sigma_p_xx"] = sol.sigma_p[:, 0]
        data["sigma_p_xy"] = sol.sigma_p[:, 1]
        data["sigma_p_yy"] = sol.sigma_p[:, 2]
    return data


def _run_point(cfg: ExperimentConfig, u_in: float, d_out: float,
               point_dir: Path) -> dict:
    """Baseline solve + optimization for one operating point."""
    point_dir.mkdir(parents=True, exist_ok=True)
    dims = replace(cfg.dims, d_out=d_out)
    bc = BoundaryConditions(u_in=u_in, T_wall=cfg.T_wall, T_in=cfg.T_in)

    base_profile, base_mesh, base_sol, base_rep = _solve(
        cfg, dims, bc, AngleParams(alpha=BASELINE_ALPHA))
    base_profile.write_polyline(point_dir / "profile_baseline.txt")
    write_vtk(point_dir / "baseline.vtk", base_mesh, _field_data(base_sol))

    kwargs = dict(dims=dims, mat=cfg.material, bc=bc, solver_cfg=cfg.solver,
                  mesh_h=cfg.mesh_h, mesh_grading=cfg.mesh_grading,
                  budget=cfg.budget, seed=cfg.seed,
                  history_path=point_dir / "history.csv")
    if cfg.parametrization == "spline":
        opt = optimize_spline(seed_alpha=cfg.alpha0, n_ctrl=cfg.n_ctrl,
                              degree=cfg.degree, **kwargs)
        params_opt = opt["params_opt"]
        alpha_opt = float(params_opt.alpha_scale)
        y_ctrl = " ".join(repr(float(y)) for y in params_opt.y_ctrl)
    else:
        opt = optimize_angle(alpha0=cfg.alpha0, **kwargs)
        params_opt = AngleParams(alpha=opt["alpha_opt"])
        alpha_opt = opt["alpha_opt"]
        y_ctrl = ""

    opt_profile, opt_mesh, opt_sol, opt_rep = _solve(cfg, dims, bc, params_opt)
    opt_profile.write_polyline(point_dir / "profile_optimal.txt")
    write_vtk(point_dir / "optimal.vtk", opt_mesh, _field_data(opt_sol))

    # the improvement column must recompute exactly from the dp columns,
    # so derive it from the kPa values that are actually written
    dp_base_kpa = float(base_rep.delta_p / 1e3)
    dp_opt_kpa = float(opt_rep.delta_p / 1e3)
    improvement = relative_improvement(dp_opt_kpa, dp_base_kpa)
    return {
        "u_in_mm_s": repr(float(u_in)),
        "d_out_mm": repr(float(d_out)),
        "parametrization": cfg.parametrization,
        "alpha_opt_deg": repr(float(alpha_opt)),
        "spline_y_ctrl_mm": y_ctrl,
        "dp_baseline": repr(dp_base_kpa),
        "dp_opt": repr(dp_opt_kpa),
        "pressure_unit": PRESSURE_UNIT,
        "improvement": repr(float(improvement)),
        "n_vortices_opt": str(opt_rep.diagnostics.get("n_vortices", "")),
        "status": "ok",
        "error": "",
    }


def _failed_row(cfg, u_in, d_out, exc) -> dict:
    row = {k: "" for k in SWEEP_COLUMNS}
    row.update({
        "u_in_mm_s": repr(float(u_in)),
        "d_out_mm": repr(float(d_out)),
        "parametrization": cfg.parametrization,
        "pressure_unit": PRESSURE_UNIT,
        "status": "failed",
        "error": f"{type(exc).__name__}: {exc}".replace("\n", " ")[:500],
    })
    return row


def _write_csv(path, columns, rows):
    with open(path, "w") as f:
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(str(row[c]) for c in columns) + "\n")


def _write_metadata(path, cfg: ExperimentConfig, t0, t1, notes):
    with open(path, "w") as f:
        f.write(f"started {time.strftime('%Y-%m-%dT%H:%M:%S', time.localtime(t0))}\n")
        f.write(f"finished {time.strftime('%Y-%m-%dT%H:%M:%S', time.localtime(t1))}\n")
        f.write(f"duration_s {t1 - t0:.3f}\n")
        f.write(f"model {cfg.model}\n")
        f.write(f"parametrization {cfg.parametrization}\n")
        f.write(f"seed {cfg.seed}\n")
        f.write(f"mesh_h {cfg.mesh_h}\n")
        for note in notes:
            f.write(f"note {note}\n")


def run_experiment(cfg: ExperimentConfig, workers: int = 1,
                   output_dir=None) -> dict:
    """Run the configured sweep; returns row dicts and the CSV path.

    Each sweep point runs a baseline 30-degree solve and an optimization
    with the same mesh policy. Per-point failures are recorded as rows
    and the run continues. Rows are sorted by (feeding rate, outlet
    diameter); timestamps go to a separate metadata file so re-runs are
    byte-identical in the CSV.
    """
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    diams = cfg.outlet_diameters or [cfg.dims.d_out]
    points = sorted((float(r), float(d))
                    for r in cfg.feeding_rates for d in diams)

    t0 = time.time()
    notes = []

    def task(point):
        u_in, d_out = point
        tag = f"point_u{u_in:g}_d{d_out:g}"
        try:
            return _run_point(cfg, u_in, d_out, out / tag)
        except NozzleOptError as exc:
            return _failed_row(cfg, u_in, d_out, exc)
        except Exception as exc:  # record, keep the sweep alive
            notes.append(traceback.format_exc().replace("\n", " | ")[:1000])
            return _failed_row(cfg, u_in, d_out, exc)

    if workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(task, points))
    else:
        rows = [task(p) for p in points]

    csv_path = out / "results.csv"
    _write_csv(csv_path, SWEEP_COLUMNS, rows)
    t1 = time.time()
    _write_metadata(out / "metadata.txt", cfg, t0, t1, notes)
    try:
        from .plots import render_sweep_figures
        figures = render_sweep_figures(rows, out)
    except Exception as exc:
        figures = []
        notes.append(f"figure rendering failed: {exc}")
    return {"rows": rows, "csv_path": csv_path, "output_dir": out,
            "figures": figures}


def flow_field_gallery(cfg: ExperimentConfig, angles, workers: int = 1,
                       output_dir=None) -> dict:
    """Solve at each listed angle (no optimization) and export the fields.

    Writes one VTK file per angle with velocity, pressure, and the extra
    model fields, plus a summary CSV with the pressure drop and a vortex
    flag per angle. Per-angle failures are recorded as rows.
    """
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dims = cfg.dims
    bc = BoundaryConditions(u_in=cfg.u_in, T_wall=cfg.T_wall, T_in=cfg.T_in)

    t0 = time.time()
    notes = []
    solutions = {}

    def task(alpha):
        alpha = float(alpha)
        try:
            profile, mesh, sol, rep = _solve(cfg, dims, bc,
                                             AngleParams(alpha=alpha))
            write_vtk(out / f"field_a{alpha:g}.vtk", mesh, _field_data(sol))
            profile.write_polyline(out / f"profile_a{alpha:g}.txt")
            n_vort = int(rep.diagnostics.get("n_vortices", 0))
            solutions[alpha] = (mesh, sol, rep)
            return {
                "alpha_deg": repr(alpha),
                "dp": repr(float(rep.delta_p / 1e3)),
                "pressure_unit": PRESSURE_UNIT,
                "n_vortices": str(n_vort),
                "vortex": "yes" if n_vort else "no",
                "mass_balance_error": repr(float(sol.mass_balance_error)),
                "status": "ok",
                "error": "",
            }
        except Exception as exc:
            notes.append(f"alpha={alpha}: {type(exc).__name__}: {exc}")
            row = {k: "" for k in GALLERY_COLUMNS}
            row.update({"alpha_deg": repr(alpha),
                        "pressure_unit": PRESSURE_UNIT,
                        "status": "failed",
                        "error": f"{type(exc).__name__}: {exc}"
                                 .replace("\n", " ")[:500]})
            return row

    ordered = sorted(float(a) for a in angles)
    if workers > 1 and len(ordered) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(task, ordered))
    else:
        rows = [task(a) for a in ordered]

    csv_path = out / "gallery.csv"
    _write_csv(csv_path, GALLERY_COLUMNS, rows)
    t1 = time.time()
    _write_metadata(out / "gallery_metadata.txt", cfg, t0, t1, notes)
    try:
        from .plots import render_gallery_figures
        figures = render_gallery_figures(rows, solutions, out)
    except Exception as exc:
        figures = []
        notes.append(f"figure rendering failed: {exc}")
    return {"rows": rows, "csv_path": csv_path, "output_dir": out,
            "figures": figures}
