"""Derivative-free trust-region optimization of nozzle profiles.

A quadratic surrogate is interpolated through the evaluation set (with the
minimum-Frobenius-norm Hessian when the set is too small to determine a
full quadratic) and minimized inside a trust region subject to bounds and
affine inequality constraints. Failed black-box evaluations are recorded
as infeasible with a penalty value rather than aborting the run.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize as sopt

from .errors import EvaluatorFailure, InfeasibleStart, NozzleOptError
from .geometry import (ANGLE_MAX, ANGLE_MIN, MONOTONE_EPS, AngleParams,
                       NozzleDims, SplineParams, build_profile,
                       seed_spline_ordinates)
from .materials import GiesekusParams
from .meshing import generate_mesh
from .objective import pressure_drop
from .solver import SolverConfig, solve_gnf, solve_viscoelastic
from .solver.core import AXISYM, PLANAR

TERM_RADIUS = "RadiusFloor"
TERM_BUDGET = "Budget"
TERM_STAGNATION = "Stagnation"


@dataclass
class OptProblem:
    """Black-box minimization over a box with affine inequalities.

    ``lin_ineq`` is (A, b) with feasibility defined as A @ x + b > 0
    elementwise (monotonicity residuals for spline ordinates); None means
    unconstrained beyond the bounds.
    """

    objective: callable
    x0: np.ndarray
    bounds: list
    lin_ineq: tuple | None = None
    budget: int = 100
    tol_x: float | None = None

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        self.bounds = [(float(lo), float(hi)) for lo, hi in self.bounds]
        if len(self.bounds) != len(self.x0):
            raise ValueError("bounds/x0 dimension mismatch")
        if self.budget < 2 * self.dim + 1:
            raise ValueError("budget must cover the initial interpolation set")

    @property
    def dim(self) -> int:
        return len(self.x0)


@dataclass
class OptResult:
    x_best: np.ndarray
    f_best: float
    n_evals: int
    history: list = field(default_factory=list)   # (x, f, feasible)
    termination: str = ""
    model_residual: float = 0.0   # max surrogate interpolation error seen


def _feasible(x, bounds, lin_ineq, tol=1e-9):
    for xi, (lo, hi) in zip(x, bounds):
        if xi < lo - tol or xi > hi + tol:
            return False
    if lin_ineq is not None:
        A, b = lin_ineq
        if np.any(A @ x + b <= -tol):
            return False
    return True


def _quadratic_model(S, f):
    """Interpolate f on displacement set S (k, d), MFN Hessian.

    Returns (c, g, mu) for m(s) = c + g.s + sum_i mu_i 0.5 (S_i . s)^2.
    """
    k, d = S.shape
    K = 0.5 * (S @ S.T) ** 2
    P = np.column_stack([np.ones(k), S])
    top = np.column_stack([K, P])
    bot = np.column_stack([P.T, np.zeros((d + 1, d + 1))])
    M = np.vstack([top, bot])
    rhs = np.concatenate([f, np.zeros(d + 1)])
    sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    mu = sol[:k]
    c = sol[k]
    g = sol[k + 1:]
    return c, g, mu


def _model_value(c, g, mu, S, s):
    t = S @ s
    return c + g @ s + 0.5 * float(mu @ t ** 2)


def _model_grad(c, g, mu, S, s):
    t = S @ s
    return g + S.T @ (mu * t)


def optimize(problem: OptProblem, seed: int = 0,
             history_path=None, checkpoint_path=None,
             checkpoint_every: int = 10) -> OptResult:
    """Trust-region loop over the quadratic interpolation surrogate.

    Deterministic for a fixed seed and evaluator. Evaluations that raise
    or return non-finite values enter the history as infeasible with a
    penalty of 10x the incumbent objective.
    """
    d = problem.dim
    lo = np.array([b[0] for b in problem.bounds])
    hi = np.array([b[1] for b in problem.bounds])
    rng_x = hi - lo
    if np.any(rng_x <= 0.0):
        raise ValueError("each bound interval must have positive width")
    if not _feasible(problem.x0, problem.bounds, problem.lin_ineq):
        raise InfeasibleStart(f"x0={problem.x0} violates bounds/constraints")

    # normalized coordinates z in [0, 1]^d
    def to_z(x):
        return (np.asarray(x) - lo) / rng_x

    def to_x(z):
        return lo + np.asarray(z) * rng_x

    if problem.lin_ineq is not None:
        A, b = problem.lin_ineq
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        Az = A * rng_x[None, :]
        bz = b + A @ lo
        lin_z = (Az, bz)
    else:
        lin_z = None

    rng = np.random.default_rng(seed)
    history = []
    hist_file = open(history_path, "w", newline="") if history_path else None
    writer = None
    if hist_file:
        writer = csv.writer(hist_file)
        writer.writerow([f"x{i}" for i in range(d)] + ["f", "feasible"])

    state = {"f_best": np.inf, "x_best": problem.x0.copy()}

    def evaluate(z):
        x = to_x(np.clip(z, 0.0, 1.0))
        try:
            f = float(problem.objective(x))
            ok = np.isfinite(f)
        except NozzleOptError:
            ok = False
        except (ArithmeticError, ValueError) as exc:
            raise EvaluatorFailure(str(exc)) from exc
        if not ok:
            f = 10.0 * abs(state["f_best"]) if np.isfinite(state["f_best"]) else 1e30
        history.append((x.copy(), f, ok))
        if writer:
            writer.writerow([*(f"{v:.12g}" for v in x), f"{f:.12g}", int(ok)])
        if ok and f < state["f_best"]:
            state["f_best"] = f
            state["x_best"] = x.copy()
        return f, ok

    def write_checkpoint():
        if not checkpoint_path:
            return
        with open(checkpoint_path, "w") as fh:
            fh.write(f"n_evals {len(history)}\n")
            fh.write(f"f_best {state['f_best']:.16g}\n")
            fh.write("x_best " + " ".join(f"{v:.16g}" for v in state["x_best"]) + "\n")

    delta = 0.1
    floor = (problem.tol_x / float(np.min(rng_x))) if problem.tol_x else 1e-4

    def project_feasible(z, z_ref):
        """Pull z toward z_ref until the affine constraints hold."""
        z = np.clip(z, 0.0, 1.0)
        if lin_z is None:
            return z
        for _ in range(60):
            if np.all(lin_z[0] @ z + lin_z[1] > 0.0):
                return z
            z = 0.5 * (z + z_ref)
        return z_ref.copy()

    # initial interpolation set: x0 plus +/- steps along each axis
    z0 = to_z(problem.x0)
    zs, fs, oks = [], [], []
    for z in [z0] + [z0 + s * delta * e
                     for e in np.eye(d) for s in (+1.0, -1.0)]:
        z = project_feasible(z, z0)
        if any(np.linalg.norm(z - q) < 1e-12 for q in zs):
            z = project_feasible(z0 + delta * rng.uniform(-1, 1, d), z0)
        f, ok = evaluate(z)
        zs.append(z)
        fs.append(f)
        oks.append(ok)

    model_residual = 0.0
    stagnation = 0
    need_geometry = False
    termination = TERM_BUDGET
    while len(history) < problem.budget:
        good = [i for i in range(len(zs)) if oks[i]]
        if len(good) < d + 1:
            # set too thin after failures: sample around the incumbent
            z_new = project_feasible(
                to_z(state["x_best"]) + delta * rng.uniform(-1, 1, d), z0)
            f, ok = evaluate(z_new)
            zs.append(z_new)
            fs.append(f)
            oks.append(ok)
            continue
        zb = to_z(state["x_best"])
        fb = state["f_best"]
        S = np.array([zs[i] for i in good]) - zb[None, :]
        fg = np.array([fs[i] for i in good])

        if need_geometry:
            # after a rejection, refresh the set along its least-sampled
            # direction before trusting the model again
            _, sv, Vt = np.linalg.svd(S, full_matrices=True)
            v = Vt[-1]
            cand = [project_feasible(zb + s * delta * v, zb) for s in (1.0, -1.0)]
            z_geo = max(cand, key=lambda q: min(
                [np.linalg.norm(q - p) for p in zs], default=1.0))
            if min([np.linalg.norm(z_geo - p) for p in zs], default=1.0) > 1e-13:
                f_geo, ok_geo = evaluate(z_geo)
                far = int(np.argmax([np.linalg.norm(q - zb) for q in zs]))
                zs[far], fs[far], oks[far] = z_geo, f_geo, ok_geo
                need_geometry = False
                continue
            need_geometry = False
        c, g, mu = _quadratic_model(S, fg)
        model_residual = max(model_residual, max(
            abs(_model_value(c, g, mu, S, s) - fv)
            for s, fv in zip(S, fg)) / max(1.0, np.abs(fg).max()))

        cons = [{"type": "ineq",
                 "fun": lambda s, dd=delta: dd ** 2 - s @ s,
                 "jac": lambda s: -2.0 * s}]
        if lin_z is not None:
            cons.append({"type": "ineq",
                         "fun": lambda s: lin_z[0] @ (zb + s) + lin_z[1],
                         "jac": lambda s: lin_z[0]})
        res = sopt.minimize(
            lambda s: _model_value(c, g, mu, S, s),
            np.zeros(d), jac=lambda s: _model_grad(c, g, mu, S, s),
            bounds=[(l - z, h - z) for (l, h), z in zip([(0, 1)] * d, zb)],
            constraints=cons, method="SLSQP",
            options={"maxiter": 200, "ftol": 1e-14})
        s_new = res.x if res.success or np.linalg.norm(res.x) > 0 else np.zeros(d)
        pred = fb - _model_value(c, g, mu, S, s_new)
        z_new = project_feasible(zb + s_new, zb)

        if (np.linalg.norm(z_new - zb) < 1e-13
                or any(np.linalg.norm(z_new - q) < 1e-13 for q in zs)):
            # degenerate step: improve set geometry with a random poll
            z_new = project_feasible(zb + delta * rng.uniform(-1, 1, d), zb)
            if any(np.linalg.norm(z_new - q) < 1e-13 for q in zs):
                delta *= 0.5
                if delta < floor:
                    termination = TERM_RADIUS
                    break
                continue

        f_new, ok = evaluate(z_new)
        if len(history) % checkpoint_every == 0:
            write_checkpoint()

        rho = (fb - f_new) / pred if (ok and pred > 0.0) else -1.0
        if ok and rho > 0.7 and np.linalg.norm(s_new) > 0.9 * delta:
            delta = min(2.0 * delta, 0.5)
        elif not ok or rho <= 0.1:
            delta *= 0.5
            need_geometry = True

        # maintain the set: replace the point farthest from the incumbent
        if len(zs) >= (d + 1) * (d + 2) // 2 + d:
            far = int(np.argmax([np.linalg.norm(q - zb) for q in zs]))
            zs[far], fs[far], oks[far] = z_new, f_new, ok
        else:
            zs.append(z_new)
            fs.append(f_new)
            oks.append(ok)

        rel_impr = (fb - f_new) / max(abs(fb), 1e-30) if ok else 0.0
        pred_impr = pred / max(abs(fb), 1e-30)
        # a rejected step with a large predicted gain is model error (shrink
        # and retry), not stagnation; count it only once predictions die out
        if rel_impr < 1e-8 and pred_impr < 1e-6:
            stagnation += 1
            if stagnation >= 3 * d:
                termination = TERM_STAGNATION
                break
        else:
            stagnation = 0
        if delta < floor:
            termination = TERM_RADIUS
            break

    write_checkpoint()
    if hist_file:
        hist_file.close()
    return OptResult(x_best=state["x_best"], f_best=state["f_best"],
                     n_evals=len(history), history=history,
                     termination=termination, model_residual=model_residual)


def _flow_evaluator(dims, mat, bc, solver_cfg, mesh_h, mesh_grading,
                    make_params):
    """Wrap geometry -> mesh -> solve -> pressure drop as a black box."""
    viscoelastic = isinstance(mat, GiesekusParams)
    mode = solver_cfg.mode if solver_cfg else (PLANAR if viscoelastic else AXISYM)
    cfg = solver_cfg or SolverConfig(mode=mode)
    cache = {}
    reports = {}

    def objective(x):
        key = tuple(np.round(np.asarray(x, dtype=float), 12))
        if key in cache:
            return cache[key]
        profile = build_profile(dims, make_params(x))
        mesh = generate_mesh(profile, h=mesh_h, grading=mesh_grading)
        if viscoelastic:
            sol = solve_viscoelastic(mesh, bc, mat, cfg)
        else:
            sol = solve_gnf(mesh, bc, mat, cfg)
        rep = pressure_drop(sol, mesh, dims, cfg.mode)
        cache[key] = rep.delta_p
        reports[key] = rep
        return rep.delta_p

    objective.reports = reports
    return objective


def optimize_angle(dims: NozzleDims, mat, bc, solver_cfg=None,
                   alpha0: float = 50.0, mesh_h: float = 0.1,
                   mesh_grading: float = 0.5, budget: int = 25, seed: int = 0,
                   history_path=None) -> dict:
    """One-dimensional optimization of the contraction half-angle."""
    objective = _flow_evaluator(dims, mat, bc, solver_cfg, mesh_h,
                                mesh_grading,
                                lambda x: AngleParams(alpha=float(x[0])))
    problem = OptProblem(objective=objective, x0=np.array([alpha0]),
                         bounds=[(ANGLE_MIN, ANGLE_MAX)], budget=budget)
    result = optimize(problem, seed=seed, history_path=history_path)
    return {"alpha_opt": float(result.x_best[0]),
            "dp_opt": float(result.f_best),
            "report": result}


def optimize_spline(dims: NozzleDims, mat, bc, solver_cfg=None,
                    seed_alpha: float = 50.0, n_ctrl: int = 6,
                    degree: int = 3, mesh_h: float = 0.1,
                    mesh_grading: float = 0.5, budget: int = 60,
                    seed: int = 0, history_path=None) -> dict:
    """Joint optimization of (angle scale, interior spline ordinates).

    End ordinates stay pinned to r_in/r_out; interior ones move under the
    monotonicity constraints.
    """
    y_seed = seed_spline_ordinates(dims, seed_alpha, n_ctrl)
    r_in, r_out = dims.r_in, dims.r_out

    def make_params(x):
        y = (r_in, *x[1:], r_out)
        return SplineParams(alpha_scale=float(x[0]), y_ctrl=y)

    objective = _flow_evaluator(dims, mat, bc, solver_cfg, mesh_h,
                                mesh_grading, make_params)

    m = n_ctrl - 2   # free interior ordinates
    x0 = np.array([seed_alpha, *y_seed[1:-1]])
    bounds = [(ANGLE_MIN, ANGLE_MAX)] + [(r_out, r_in)] * m
    # chain y_j - y_{j+1} - eps > 0 over (r_in, y1..ym, r_out)
    A = np.zeros((m + 1, m + 1))
    b = np.full(m + 1, -MONOTONE_EPS)
    for j in range(m + 1):
        if j > 0:
            A[j, j] = 1.0
        else:
            b[j] += r_in
        if j < m:
            A[j, j + 1] = -1.0
        else:
            b[j] -= r_out
    problem = OptProblem(objective=objective, x0=x0, bounds=bounds,
                         lin_ineq=(A, b), budget=budget)
    result = optimize(problem, seed=seed, history_path=history_path)
    return {"params_opt": make_params(result.x_best),
            "dp_opt": float(result.f_best),
            "report": result}
