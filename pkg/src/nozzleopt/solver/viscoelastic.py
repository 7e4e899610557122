"""Isothermal planar Giesekus solver.

Decoupled Picard iteration: a constant-coefficient Stokes system (solvent
plus polymeric viscosity on the left, the difference moved to the right —
the usual both-sides-diffusion trick) alternates with an SUPG-stabilized
solve of the constitutive equation, whose quadratic term is linearized
about the previous stress. High Weissenberg targets are reached by
continuation: relaxation time walked up geometrically while the mobility
factor walks down, each stage warm-starting the next.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse.linalg as spla

from ..errors import NoConvergence
from ..materials import GiesekusParams
from ..meshing import Mesh, INLET
from .core import (MM, PLANAR, BoundaryConditions, FlowSolution, P1Grid,
                   SolverConfig, _MASS, _accumulate, _outer, advection_rhs,
                   apply_dirichlet, mass_balance_error,
                   solve_sparse, stokes_matrix, stress_divergence_rhs,
                   velocity_dirichlet)


def default_continuation(mat: GiesekusParams, n_stages: int = 8,
                         alpha_start: float = 0.25) -> list:
    """Geometric walk (lam/16 -> lam, alpha_start -> alpha_g)."""
    if mat.lam == 0.0:
        return [(0.0, mat.alpha_g)]
    lams = mat.lam * np.geomspace(1.0 / 16.0, 1.0, n_stages)
    alphas = np.geomspace(max(alpha_start, mat.alpha_g), mat.alpha_g, n_stages)
    return list(zip(lams, alphas))


def _stress_system(grid: P1Grid, u, sig_old, lam, alpha_g, eta_p, dt=None,
                   diff_coef=0.0):
    """Linearized Giesekus transport for s = (sxx, sxy, syy), SI units.

    ``sig_old`` is the nodal stress of the previous iterate. With ``dt``
    set, a backward-Euler pseudo-time term lam/dt is added so the iteration
    marches the (stable) transient instead of jumping to the steady map.
    """
    A = grid.area
    m = len(A)
    bx = grid.grad[:, :, 0]
    by = grid.grad[:, :, 1]
    uc = grid.to_centroid(u)
    gux = grid.grad_field(u[:, 0])
    guy = grid.grad_field(u[:, 1])
    lxx, lxy = gux[:, 0], gux[:, 1]
    lyx, lyy = guy[:, 0], guy[:, 1]
    exx, exy, eyy = lxx, 0.5 * (lxy + lyx), lyy

    speed = np.linalg.norm(uc, axis=1)
    tau = grid.h_e / (2.0 * speed + 1e-12 * max(float(np.max(speed)), 1.0))

    # Reaction coefficient matrix C = I - lam*B(L) + (alpha lam / eta_p) Q(sig_old)
    sig_old_c = grid.to_centroid(sig_old)
    oxx, oxy, oyy = sig_old_c[:, 0], sig_old_c[:, 1], sig_old_c[:, 2]
    ag = alpha_g * lam / eta_p
    zero = np.zeros(m)
    one = np.ones(m) if dt is None else np.full(m, 1.0 + lam / dt)
    C = np.empty((m, 3, 3))
    C[:, 0, 0] = one - lam * 2.0 * lxx + ag * oxx
    C[:, 0, 1] = -lam * 2.0 * lxy + ag * oxy
    C[:, 0, 2] = zero
    C[:, 1, 0] = -lam * lyx + ag * 0.5 * oxy
    C[:, 1, 1] = one - lam * (lxx + lyy) + ag * 0.5 * (oxx + oyy)
    C[:, 1, 2] = -lam * lxy + ag * 0.5 * oxy
    C[:, 2, 0] = zero
    C[:, 2, 1] = -lam * 2.0 * lyx + ag * oxy
    C[:, 2, 2] = one - lam * 2.0 * lyy + ag * oyy

    adv_i = uc[:, 0:1] * bx + uc[:, 1:2] * by        # (M, 3) u.grad(phi)
    mass = A[:, None, None] * _MASS[None]            # int phi_i phi_j
    supg_mass = (A / 3.0)[:, None, None] * _outer(tau[:, None] * adv_i,
                                                  np.ones((m, 3)))
    test_mass = mass + supg_mass                     # int psi_i phi_j
    adv_gal = (A / 3.0)[:, None, None] * _outer(np.ones((m, 3)), adv_i)
    adv_supg = A[:, None, None] * _outer(tau[:, None] * adv_i, adv_i)
    adv_blk = lam * (adv_gal + adv_supg)

    # mesh-consistent artificial diffusion (coef * h_e^2): regularizes the
    # steep stress layers at high Weissenberg, vanishes under refinement
    diff_blk = None
    if diff_coef > 0.0:
        diff_blk = (diff_coef * grid.h_e ** 2 * A)[:, None, None] * (
            _outer(bx, bx) + _outer(by, by))

    blocks = {}
    for c in range(3):
        for d in range(3):
            blk = C[:, c, d][:, None, None] * test_mass
            if c == d:
                blk = blk + adv_blk
                if diff_blk is not None:
                    blk = blk + diff_blk
            blocks[(c, d)] = blk
    K = _accumulate(blocks, 3, 3, grid)

    rhs = np.zeros(3 * grid.n)
    f = 2.0 * eta_p * np.stack([exx, exy, eyy], axis=1)
    wgt = (A / 3.0)[:, None] + (A * tau)[:, None] * adv_i  # int psi_i
    for c in range(3):
        np.add.at(rhs, grid.tri + c * grid.n, f[:, c:c + 1] * wgt)
    if dt is not None:
        coef = lam / dt
        for c in range(3):
            vals = np.einsum("mij,mj->mi", test_mass, sig_old[grid.tri, c])
            np.add.at(rhs, grid.tri + c * grid.n, coef * vals)
    return K, rhs


def _project_stress(grid: P1Grid, sig_e):
    """Consistent L2 projection of element stresses onto nodes."""
    mass = _accumulate({(0, 0): grid.area[:, None, None] * _MASS[None]}, 1, 1, grid)
    out = np.empty((grid.n, sig_e.shape[1]))
    lu = spla.splu(mass.tocsc())
    for c in range(sig_e.shape[1]):
        rhs = np.zeros(grid.n)
        np.add.at(rhs, grid.tri,
                  np.repeat((grid.area * sig_e[:, c] / 3.0)[:, None], 3, axis=1))
        out[:, c] = lu.solve(rhs)
    return out


def solve_viscoelastic(mesh: Mesh, bc: BoundaryConditions, mat: GiesekusParams,
                       cfg: SolverConfig | None = None) -> FlowSolution:
    """Steady planar (u, p, sigma_p) solve of the Giesekus model.

    On failure raises NoConvergence carrying the last continuation stage
    that did converge, so callers can retry with a finer schedule.
    """
    cfg = cfg or SolverConfig(mode=PLANAR)
    grid = P1Grid(mesh)
    n = grid.n
    eta_tot = mat.eta_total
    eta_p = mat.eta_p

    vel_idx, vel_val = velocity_dirichlet(mesh, bc)
    A_stokes = stokes_matrix(grid, np.full(len(grid.area), eta_tot), PLANAR,
                             cfg.pspg_alpha)
    # The Stokes operator is constant (both-sides diffusion), so factorize
    # it once and only rebuild the constrained right-hand side per solve.
    A_bc, _ = apply_dirichlet(A_stokes, np.zeros(3 * n), vel_idx, vel_val)
    lu = spla.splu(A_bc.tocsc())
    x_fix = np.zeros(3 * n)
    x_fix[vel_idx] = vel_val
    keep = np.ones(3 * n)
    keep[vel_idx] = 0.0
    lift = A_stokes @ x_fix

    def stokes_solve(rhs):
        return lu.solve(keep * (rhs - lift) + x_fix)

    # Newtonian start (also the lam = 0 fixed point).
    rhs0 = np.zeros(3 * n)
    sol0 = stokes_solve(rhs0)
    u = np.column_stack([sol0[:n], sol0[n:2 * n]])
    p = sol0[2 * n:]
    if cfg.include_advection and mat.rho > 0.0:
        sol0 = stokes_solve(advection_rhs(grid, u, mat.rho, PLANAR))
        u = np.column_stack([sol0[:n], sol0[n:2 * n]])
        p = sol0[2 * n:]

    exx, exy, eyy = grid.strain_rate(u)
    sig_nodes = _project_stress(grid, 2.0 * eta_p * np.stack([exx, exy, eyy], axis=1))

    history = []
    trace = []
    if mat.lam == 0.0:
        sol = FlowSolution(u=u / MM, p=p, sigma_p=sig_nodes, converged=True,
                           residual_history=[0.0], continuation_trace=[(0.0, mat.alpha_g)])
        sol.mass_balance_error = mass_balance_error(mesh, sol.u, PLANAR)
        return sol

    inlet_nodes = mesh.nodes_with_tag(INLET)
    sig_idx = np.concatenate([inlet_nodes + c * n for c in range(3)])
    sig_val = np.zeros(len(sig_idx))

    schedule = list(cfg.continuation or default_continuation(mat))
    omega_u = cfg.relaxation
    omega_s = cfg.stress_relaxation
    last_good = None
    cur_lam = 0.0
    bisections = 0
    targets = schedule.copy()
    while targets:
        lam_k, alpha_k = targets[0]
        # intermediate stages only warm-start the next one; only the final
        # target needs the full nonlinear tolerance
        stage_tol = cfg.tol_nl if len(targets) == 1 else max(
            100.0 * cfg.tol_nl, 1e-4)
        ok, out, stage_hist = _stage_iterate(
            grid, u.copy(), p.copy(), sig_nodes.copy(), lam_k, alpha_k, eta_p,
            stokes_solve, sig_idx, sig_val, omega_u, omega_s, cfg, mat,
            stage_tol)
        history.extend(stage_hist)
        if ok:
            u, p, sig_nodes = out
            trace.append((lam_k, alpha_k))
            last_good = (lam_k, alpha_k)
            cur_lam = lam_k
            targets.pop(0)
            continue
        # shrink the relaxation-time step: restart the stage from a
        # geometric midpoint between the last converged point and the target
        lam_mid = np.sqrt(cur_lam * lam_k) if cur_lam > 0.0 else 0.25 * lam_k
        alpha_prev = last_good[1] if last_good else max(0.25, alpha_k)
        alpha_mid = np.sqrt(alpha_prev * alpha_k)
        bisections += 1
        if lam_mid / lam_k > 0.98 or bisections > 12:
            omega_s *= 0.5
            bisections = 0
            if omega_s < 0.04:
                raise NoConvergence(
                    f"viscoelastic continuation failed at lam={lam_k:.4g}, "
                    f"alpha_g={alpha_k:.3g}",
                    residual=stage_hist[-1] if stage_hist else None,
                    history=history, stage=last_good)
        else:
            targets.insert(0, (lam_mid, alpha_mid))

    sol = FlowSolution(u=u / MM, p=p, sigma_p=sig_nodes, converged=True,
                       residual_history=history, continuation_trace=trace)
    sol.mass_balance_error = mass_balance_error(mesh, sol.u, PLANAR)
    return sol


def _anderson_step(xs, rs, beta):
    """One Anderson(m) mixing step from iterate/residual histories."""
    k = len(xs) - 1
    if k == 0:
        return xs[-1] + beta * rs[-1]
    dR = np.stack([rs[j] - rs[-1] for j in range(k)], axis=1)
    gamma, *_ = np.linalg.lstsq(dR, -rs[-1], rcond=1e-10)
    alpha = np.empty(k + 1)
    alpha[:k] = gamma
    alpha[k] = 1.0 - gamma.sum()
    if not np.all(np.isfinite(alpha)) or np.abs(alpha).sum() > 50.0:
        return xs[-1] + beta * rs[-1]
    x_next = np.zeros_like(xs[-1])
    for j in range(k + 1):
        x_next += alpha[j] * (xs[j] + rs[j])
    # trust-region style cap on the extrapolation length
    step = x_next - xs[-1]
    lim = 20.0 * np.linalg.norm(rs[-1])
    nrm = np.linalg.norm(step)
    if nrm > lim:
        x_next = xs[-1] + step * (lim / nrm)
    return x_next


def _stage_iterate(grid, u, p, sig_nodes, lam_k, alpha_k, eta_p,
                   stokes_solve, sig_idx, sig_val, omega_u, omega_s, cfg, mat,
                   tol):
    """Pseudo-transient Picard loop for one continuation stage.

    Marches the stress equation in adaptive pseudo-time (step grows while
    the residual falls, shrinks when it grows), so the iteration tracks
    the stable physical transient even where the steady Picard map is not
    contractive. Returns (ok, (u, p, sig), residual history).
    """
    n = grid.n
    hist = []
    dt0 = lam_k
    dt = dt0
    dt_max = 1e5 * lam_k
    res0 = None
    prev_res = np.inf
    scale = None
    and_x, and_r = [], []        # Anderson acceleration history
    and_depth = 4
    accel_gate = 5e-2            # residual below which acceleration engages
    for _ in range(cfg.max_iters):
        K, rhs = _stress_system(grid, u, sig_nodes, lam_k, alpha_k, eta_p,
                                dt=dt, diff_coef=cfg.stress_diffusion)
        K, rhs = apply_dirichlet(K, rhs, sig_idx, sig_val)
        s = solve_sparse(K, rhs)
        sig_new = np.column_stack([s[:n], s[n:2 * n], s[2 * n:]])

        exx, exy, eyy = grid.strain_rate(u)
        dev = 2.0 * eta_p * np.stack([exx, exy, eyy], axis=1)
        sig_e = grid.to_centroid(sig_new) - dev
        rhs_m = stress_divergence_rhs(grid, sig_e, PLANAR)
        if cfg.include_advection and mat.rho > 0.0:
            rhs_m = rhs_m + advection_rhs(grid, u, mat.rho, PLANAR)
        sol = stokes_solve(rhs_m)
        u_new = np.column_stack([sol[:n], sol[n:2 * n]])
        p = sol[2 * n:]

        # normalized fixed-point residual for both blocks, scales frozen at
        # stage start so the Anderson history stays consistent
        if scale is None:
            scale = (np.linalg.norm(u_new) or 1.0, np.linalg.norm(sig_new) or 1.0)
        u_scale, s_scale = scale
        x_vec = np.concatenate([u.ravel() / u_scale, sig_nodes.ravel() / s_scale])
        g_vec = np.concatenate([u_new.ravel() / u_scale, sig_new.ravel() / s_scale])
        r = g_vec - x_vec
        res = max(np.linalg.norm(u_new - u) / u_scale,
                  np.linalg.norm(sig_new - sig_nodes) / s_scale)
        hist.append(res)
        if not np.isfinite(res) or res > 1e3:
            return False, None, hist
        if res * (1.0 + lam_k / dt) < tol:
            # step change understates the steady residual at small dt
            return True, (u_new, p, sig_new), hist

        if res < accel_gate:
            # Anderson acceleration damps the oscillatory modes of the
            # alternating velocity/stress update near the fixed point
            if res > 2.0 * prev_res:
                and_x.clear()       # restart on loss of linearity
                and_r.clear()
            and_x.append(x_vec)
            and_r.append(r)
            if len(and_x) > and_depth + 1:
                and_x.pop(0)
                and_r.pop(0)
            x_next = _anderson_step(and_x, and_r, omega_s)
            u = x_next[:2 * n].reshape(n, 2) * u_scale
            sig_nodes = x_next[2 * n:].reshape(n, 3) * s_scale
        else:
            # pseudo-transient phase: full backward-Euler stress step,
            # relaxed quasi-static velocity response
            and_x.clear()
            and_r.clear()
            sig_nodes = sig_nodes + omega_s * (sig_new - sig_nodes)
            u = u + omega_u * (u_new - u)

        # SER step control: step inversely proportional to the residual,
        # so the march stays on the stable transient while it is nonlinear
        if res0 is None:
            res0 = res
        dt = float(np.clip(dt0 * res0 / max(res, 1e-30), dt0, dt_max))
        if cfg.verbose:
            print(f"    lam={lam_k:.4g} it={len(hist)} res={res:.3e} "
                  f"dt/lam={dt / lam_k:.1f} m={len(and_x)}")
        prev_res = res
    return False, None, hist
