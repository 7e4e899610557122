import numpy as np
import pytest

from nozzleopt.errors import NoConvergence
from nozzleopt.geometry import NozzleDims, build_angle_profile
from nozzleopt.materials import CrossWlfParams
from nozzleopt.meshing import generate_mesh, straight_channel_profile
from nozzleopt.objective import section_average_pressure
from nozzleopt.solver import BoundaryConditions, SolverConfig, solve_gnf
from nozzleopt.solver.core import AXISYM, mass_balance_error
from nozzleopt.solver.diagnostics import outlet_temperature_profile

# Newtonian limit of the Cross law: enormous tau_star disables shear
# thinning, A1 = 0 disables the temperature shift, so eta = D1 everywhere.
NEWTONIAN = CrossWlfParams(tau_star=1e20, n=0.25, D1=2000.0,
                           T_ref=373.0, A1=0.0, A2=51.6)


def _pipe(h):
    return generate_mesh(straight_channel_profile(length=5.0, radius=0.25),
                         h=h)


def test_zero_inflow_gives_zero_solution():
    mesh = _pipe(0.1)
    bc = BoundaryConditions(u_in=0.0, T_wall=373.0, T_in=373.0)
    sol = solve_gnf(mesh, bc, NEWTONIAN, SolverConfig())
    assert sol.converged
    assert np.max(np.abs(sol.u)) <= 1e-12
    assert np.ptp(sol.p) <= 1e-6


def test_uniform_temperature_without_dissipation():
    mesh = _pipe(0.1)
    bc = BoundaryConditions(u_in=10.0, T_wall=373.0, T_in=373.0)
    cfg = SolverConfig(include_dissipation=False)
    sol = solve_gnf(mesh, bc, NEWTONIAN, cfg)
    assert sol.converged
    assert np.max(np.abs(sol.T - 373.0)) <= 1e-6


def test_pipe_mass_conservation_and_monotone_axis_pressure():
    mesh = _pipe(0.08)
    bc = BoundaryConditions(u_in=10.0, T_wall=373.0, T_in=373.0)
    sol = solve_gnf(mesh, bc, NEWTONIAN, SolverConfig())
    assert sol.converged
    assert sol.mass_balance_error <= 5e-3
    assert sol.mass_balance_error == pytest.approx(
        mass_balance_error(mesh, sol.u, AXISYM), rel=1e-12)
    # no checkerboard: pressure decreases monotonically along the axis
    # in the developed region
    on_axis = np.abs(mesh.nodes[:, 1]) < 1e-9
    x = mesh.nodes[on_axis, 0]
    p = sol.p[on_axis]
    order = np.argsort(x)
    interior = (x[order] > 1.0) & (x[order] < 4.5)
    assert np.all(np.diff(p[order][interior]) < 0.0)


def test_pipe_self_convergence():
    # pressure drop changes by < 1% between h and h/2 (Newtonian case)
    bc = BoundaryConditions(u_in=10.0, T_wall=373.0, T_in=373.0)
    dps = []
    for h in (0.05, 0.025):
        mesh = _pipe(h)
        sol = solve_gnf(mesh, bc, NEWTONIAN, SolverConfig())
        p1 = section_average_pressure(sol, mesh, 1.0, AXISYM)
        p2 = section_average_pressure(sol, mesh, 4.0, AXISYM)
        dps.append(p1 - p2)
    assert abs(dps[1] - dps[0]) / abs(dps[1]) < 0.01


def test_nozzle_solve_heats_melt():
    mesh = generate_mesh(build_angle_profile(NozzleDims(), 30.0), h=0.2)
    bc = BoundaryConditions(u_in=1.83, T_wall=503.0, T_in=293.0)
    sol = solve_gnf(mesh, bc, CrossWlfParams(), SolverConfig())
    assert sol.converged
    assert sol.mass_balance_error <= 5e-3
    _, T_out = outlet_temperature_profile(mesh, sol.T)
    assert T_out.max() <= 503.0 + 1e-6
    assert T_out.min() > 293.0


def test_outlet_temperature_monotone_in_feeding_rate():
    # slower feed spends longer near the heated wall -> hotter outlet core
    mesh = generate_mesh(build_angle_profile(NozzleDims(), 30.0), h=0.25)
    mins = []
    for u_in in (0.67, 2.83):
        bc = BoundaryConditions(u_in=u_in, T_wall=503.0, T_in=293.0)
        sol = solve_gnf(mesh, bc, CrossWlfParams(), SolverConfig())
        _, T_out = outlet_temperature_profile(mesh, sol.T)
        mins.append(T_out.min())
    assert mins[0] > mins[1]


def test_no_convergence_reports_history():
    mesh = _pipe(0.15)
    bc = BoundaryConditions(u_in=10.0, T_wall=503.0, T_in=293.0)
    cfg = SolverConfig(max_iters=2)
    with pytest.raises(NoConvergence) as err:
        solve_gnf(mesh, bc, CrossWlfParams(), cfg)
    assert len(err.value.history) > 0
