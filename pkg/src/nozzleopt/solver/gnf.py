"""Generalized-Newtonian solver: Stokes/Navier-Stokes with Cross-WLF
viscosity coupled to the heat equation, Picard iteration with
under-relaxation. Axisymmetric by default; planar mode is used by the
Newtonian verification and equivalence tests.
"""

from __future__ import annotations

import numpy as np

from ..errors import NoConvergence
from ..materials import CrossWlfParams, cross_viscosity_clamped
from ..meshing import Mesh, INLET, HEATED_WALL
from .core import (AXISYM, MM, BoundaryConditions, FlowSolution, P1Grid,
                   SolverConfig, _THIRD, _accumulate, _outer, advection_rhs,
                   apply_dirichlet, mass_balance_error, relative_change,
                   solve_sparse, stokes_matrix, velocity_dirichlet)


def _heat_system(grid: P1Grid, u, mat: CrossWlfParams, source_e, mode):
    """SUPG-stabilized advection-diffusion for temperature.

    Assembles u.grad(T) - alpha_t lap(T) = q/(rho cp), u in m/s.
    """
    alpha_t = mat.kappa / (mat.rho * mat.cp)
    A = grid.area
    w = grid.centroid[:, 1] if mode == AXISYM else np.ones(len(A))
    bx = grid.grad[:, :, 0]
    by = grid.grad[:, :, 1]
    uc = grid.to_centroid(u)
    speed = np.linalg.norm(uc, axis=1)
    h = grid.h_e
    tau = 1.0 / np.sqrt((2.0 * speed / h) ** 2 + (4.0 * alpha_t / h ** 2) ** 2 + 1e-30)

    adv_j = uc[:, 0:1] * bx + uc[:, 1:2] * by      # (M, 3) u.grad(phi_j)
    aw = A * w
    blk = (aw[:, None, None] * alpha_t * (_outer(bx, bx) + _outer(by, by))
           + (aw / 3.0)[:, None, None] * _outer(np.broadcast_to(_THIRD * 3.0, adv_j.shape), adv_j)
           + (aw * tau)[:, None, None] * _outer(adv_j, adv_j))
    K = _accumulate({(0, 0): blk}, 1, 1, grid)

    q = source_e / (mat.rho * mat.cp)
    rhs = np.zeros(grid.n)
    contrib = (aw * q)[:, None] * (1.0 / 3.0 + tau[:, None] * adv_j)
    np.add.at(rhs, grid.tri, contrib)
    return K, rhs


def _temperature_dirichlet(mesh: Mesh, bc: BoundaryConditions):
    vals = {}
    for nd in mesh.nodes_with_tag(INLET):
        vals[nd] = bc.T_in
    for nd in mesh.nodes_with_tag(HEATED_WALL):
        vals[nd] = bc.T_wall  # wall condition wins at shared corners
    return np.array(list(vals.keys()), dtype=int), np.array(list(vals.values()))


def solve_gnf(mesh: Mesh, bc: BoundaryConditions, mat: CrossWlfParams,
              cfg: SolverConfig | None = None) -> FlowSolution:
    """Steady coupled (u, p, T) solve with Cross-WLF viscosity.

    Raises NoConvergence (with the residual history attached) if the Picard
    loop does not reach cfg.tol_nl within cfg.max_iters.
    """
    cfg = cfg or SolverConfig()
    grid = P1Grid(mesh)
    n = grid.n

    vel_idx, vel_val = velocity_dirichlet(mesh, bc)
    t_idx, t_val = _temperature_dirichlet(mesh, bc)

    # Plug-flow start: realistic advection for the initial temperature field.
    u = np.zeros((n, 2))
    u[:, 0] = bc.u_in * MM
    T = np.full(n, bc.T_in, dtype=float)
    K_t, rhs_t = _heat_system(grid, u, mat, np.zeros(len(grid.area)), cfg.mode)
    A_t, b_t = apply_dirichlet(K_t, rhs_t, t_idx, t_val)
    T = solve_sparse(A_t, b_t)

    omega = cfg.relaxation
    history = []
    converged = False
    p = np.zeros(n)
    for it in range(cfg.max_iters):
        gd = grid.gamma_dot(u, cfg.mode)
        T_c = grid.to_centroid(T)
        eta_e = cross_viscosity_clamped(gd, T_c, mat, eta0_cap=cfg.eta0_cap)

        A = stokes_matrix(grid, eta_e, cfg.mode, cfg.pspg_alpha)
        b = np.zeros(3 * n)
        if cfg.include_advection:
            b += advection_rhs(grid, u, mat.rho, cfg.mode)
        A, b = apply_dirichlet(A, b, vel_idx, vel_val)
        sol = solve_sparse(A, b)
        u_new = np.column_stack([sol[:n], sol[n:2 * n]])
        p_new = sol[2 * n:]

        w = omega if it > 0 else 1.0
        u_next = (1.0 - w) * u + w * u_new
        p = (1.0 - w) * p + w * p_new

        if cfg.include_dissipation:
            gd_next = grid.gamma_dot(u_next, cfg.mode)
            eta_next = cross_viscosity_clamped(gd_next, T_c, mat, eta0_cap=cfg.eta0_cap)
            source = eta_next * gd_next ** 2
        else:
            source = np.zeros(len(grid.area))
        K_t, rhs_t = _heat_system(grid, u_next, mat, source, cfg.mode)
        A_t, b_t = apply_dirichlet(K_t, rhs_t, t_idx, t_val)
        T_new = solve_sparse(A_t, b_t)
        T_next = (1.0 - w) * T + w * T_new

        res = max(relative_change(u_next, u), relative_change(T_next, T))
        history.append(res)
        u, T = u_next, T_next
        if res < cfg.tol_nl:
            converged = True
            break

    if not converged:
        raise NoConvergence("GNF Picard iteration did not converge",
                            residual=history[-1] if history else None,
                            history=history)

    sol = FlowSolution(u=u / MM, p=p, T=T, converged=True,
                       residual_history=history)
    sol.mass_balance_error = mass_balance_error(mesh, sol.u, cfg.mode)
    return sol
