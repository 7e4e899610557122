import numpy as np
import pytest

from nozzleopt.geometry import AngleParams, NozzleDims, build_profile
from nozzleopt.materials import (
    CrossWlfParams,
    GiesekusParams,
    giesekus_steady_shear,
)
from nozzleopt.meshing import AXIS, HEATED_WALL, WALL, generate_mesh, rectangle_mesh
from nozzleopt.solver import (
    BoundaryConditions,
    SolverConfig,
    solve_gnf,
    solve_viscoelastic,
)
from nozzleopt.solver.core import PLANAR
from nozzleopt.solver.viscoelastic import default_continuation

# Newtonian reference material for the relaxation-free limit: tau_star
# large enough that the Cross denominator correction is below 1e-10.
NEWTONIAN = CrossWlfParams(tau_star=1e20, n=0.25, D1=2000.0,
                           T_ref=373.0, A1=0.0, A2=51.6)


def test_zero_relaxation_matches_newtonian_solve():
    mesh = generate_mesh(build_profile(NozzleDims(), AngleParams(alpha=30.0)),
                         h=0.2)
    bc = BoundaryConditions(u_in=10.0, T_wall=373.0, T_in=373.0)
    cfg = SolverConfig(mode=PLANAR, include_advection=False)
    sol_n = solve_gnf(mesh, bc, NEWTONIAN, cfg)
    sol_v = solve_viscoelastic(mesh, bc, GiesekusParams(lam=0.0), cfg)
    du = np.linalg.norm(sol_v.u - sol_n.u) / np.linalg.norm(sol_n.u)
    dp = np.linalg.norm(sol_v.p - sol_n.p) / np.linalg.norm(sol_n.p)
    assert du <= 1e-6
    assert dp <= 1e-6
    assert sol_v.converged
    # stress projection reproduces the Newtonian constitutive relation:
    # simple shear dominates, so sigma_xy ~ eta_p * du/dy
    assert sol_v.sigma_p is not None


def test_couette_matches_algebraic_steady_shear():
    # moving top wall at 10 mm/s over a 1 mm gap: gamma_dot = 10 1/s
    U, H = 10.0, 1.0
    mesh = rectangle_mesh(4.0, H, 0.125,
                          tags={"left": AXIS, "right": AXIS,
                                "bottom": WALL, "top": HEATED_WALL})
    bc = BoundaryConditions(u_in=0.0,
                            velocity_overrides={HEATED_WALL: (U, 0.0)})
    mat = GiesekusParams()
    cfg = SolverConfig(mode=PLANAR, include_advection=False)
    sol = solve_viscoelastic(mesh, bc, mat, cfg)
    assert sol.converged

    ref = giesekus_steady_shear(U / H, mat)
    ctr = np.argmin(np.hypot(mesh.nodes[:, 0] - 2.0, mesh.nodes[:, 1] - 0.5))
    got = sol.sigma_p[ctr]
    for idx, name in enumerate(("xx", "xy", "yy")):
        want = ref[f"sigma_p_{name}"]
        assert got[idx] == pytest.approx(want, rel=0.02)

    # the velocity stays linear across the gap
    col = np.isclose(mesh.nodes[:, 0], 2.0)
    y = mesh.nodes[col, 1]
    assert np.max(np.abs(sol.u[col, 0] - U * y / H)) < 0.02 * U


def test_continuation_trace_reaches_target():
    mesh = generate_mesh(build_profile(NozzleDims(), AngleParams(alpha=30.0)),
                         h=0.3)
    bc = BoundaryConditions(u_in=10.0)
    mat = GiesekusParams()
    sol = solve_viscoelastic(mesh, bc, mat, SolverConfig(mode=PLANAR))
    assert sol.converged
    lam_f, alpha_f = sol.continuation_trace[-1]
    assert lam_f == pytest.approx(mat.lam, rel=1e-12)
    assert alpha_f == pytest.approx(mat.alpha_g, rel=1e-12)
    # walked up in relaxation time
    lams = [s[0] for s in sol.continuation_trace]
    assert all(b >= a for a, b in zip(lams, lams[1:]))
    assert sol.mass_balance_error <= 5e-3


def test_default_continuation_schedule():
    mat = GiesekusParams()
    sched = default_continuation(mat)
    assert len(sched) == 8
    assert sched[-1] == (pytest.approx(mat.lam), pytest.approx(mat.alpha_g))
    assert sched[0][0] == pytest.approx(mat.lam / 16.0)
    assert sched[0][1] == pytest.approx(0.25)
    lams = [s[0] for s in sched]
    assert all(b > a for a, b in zip(lams, lams[1:]))
    # zero-relaxation material needs no continuation
    assert default_continuation(GiesekusParams(lam=0.0)) == [(0.0, 0.05)]


def test_zero_inflow_zero_solution():
    mesh = generate_mesh(build_profile(NozzleDims(), AngleParams(alpha=30.0)),
                         h=0.3)
    bc = BoundaryConditions(u_in=0.0)
    sol = solve_viscoelastic(mesh, bc, GiesekusParams(), SolverConfig(mode=PLANAR))
    assert np.max(np.abs(sol.u)) <= 1e-12
    assert np.ptp(sol.p) <= 1e-6
    assert np.max(np.abs(sol.sigma_p)) <= 1e-9
