"""Command-line interface for the nozzle shape-optimization toolkit."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from ..errors import ConfigError, NozzleOptError
from ..optimizer import optimize_angle, optimize_spline
from ..solver import BoundaryConditions
from .config import default_config_text, load_config
from .experiments import flow_field_gallery, run_experiment


def _add_common(parser):
    parser.add_argument("--config", default=None,
                        help="path to an INI config (defaults embedded)")
    parser.add_argument("--output-dir", default=None,
                        help="override the config output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the optimizer seed")
    parser.add_argument("--mesh-h", type=float, default=None,
                        help="override the mesh characteristic size [mm]")
    parser.add_argument("--workers", type=int, default=1,
                        help="parallel workers for independent points")


def _load(args):
    cfg = load_config(args.config if args.config else default_config_text())
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.mesh_h is not None:
        cfg = replace(cfg, mesh_h=args.mesh_h)
    if args.output_dir is not None:
        cfg = replace(cfg, output_dir=args.output_dir)
    return cfg


def _single_optimization(cfg, spline: bool):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    bc = BoundaryConditions(u_in=cfg.u_in, T_wall=cfg.T_wall, T_in=cfg.T_in)
    kwargs = dict(dims=cfg.dims, mat=cfg.material, bc=bc,
                  solver_cfg=cfg.solver, mesh_h=cfg.mesh_h,
                  mesh_grading=cfg.mesh_grading,
                  budget=cfg.budget, seed=cfg.seed,
                  history_path=out / "history.csv")
    if spline:
        res = optimize_spline(seed_alpha=cfg.alpha0, n_ctrl=cfg.n_ctrl,
                              degree=cfg.degree, **kwargs)
        print(f"optimal angle scale: {res['params_opt'].alpha_scale:.3f} deg")
        yc = " ".join(f"{y:.4f}" for y in res["params_opt"].y_ctrl)
        print(f"optimal control ordinates [mm]: {yc}")
    else:
        res = optimize_angle(alpha0=cfg.alpha0, **kwargs)
        print(f"optimal half-angle: {res['alpha_opt']:.3f} deg")
    print(f"pressure drop: {res['dp_opt'] / 1e3:.3f} kPa")
    print(f"evaluations: {res['report'].n_evals} "
          f"({res['report'].termination})")
    print(f"history: {out / 'history.csv'}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nozzleopt",
        description="Pressure-loss-minimizing nozzle contraction design")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, desc in (
            ("optimize-angle", "optimize the contraction half-angle"),
            ("optimize-spline", "optimize the spline wall profile"),
            ("sweep", "run the configured operating-point sweep"),
            ("gallery", "solve fixed angles and export flow fields"),
            ("validate", "parse and validate a config file")):
        p = sub.add_parser(name, help=desc)
        _add_common(p)
        if name == "gallery":
            p.add_argument("--angles", default="30,50,70,90",
                           help="comma-separated half-angles [deg]")

    args = parser.parse_args(argv)
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print("configuration invalid:", file=sys.stderr)
        for violation in exc.violations:
            print(f"  - {violation}", file=sys.stderr)
        return 2

    try:
        if args.command == "validate":
            print(f"config valid: model={cfg.model}, "
                  f"parametrization={cfg.parametrization}, "
                  f"sweep points={len(cfg.feeding_rates)}")
            return 0
        if args.command == "optimize-angle":
            return _single_optimization(cfg, spline=False)
        if args.command == "optimize-spline":
            return _single_optimization(cfg, spline=True)
        if args.command == "sweep":
            res = run_experiment(cfg, workers=args.workers)
            print(f"results: {res['csv_path']}")
            for fig in res["figures"]:
                print(f"figure: {fig}")
            failed = [r for r in res["rows"] if r["status"] != "ok"]
            if failed:
                print(f"{len(failed)} point(s) failed; see the CSV",
                      file=sys.stderr)
                return 1
            return 0
        if args.command == "gallery":
            angles = [float(a) for a in args.angles.split(",") if a.strip()]
            res = flow_field_gallery(cfg, angles, workers=args.workers)
            print(f"summary: {res['csv_path']}")
            for fig in res["figures"]:
                print(f"figure: {fig}")
            failed = [r for r in res["rows"] if r["status"] != "ok"]
            return 1 if failed else 0
    except NozzleOptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
