import numpy as np
import pytest

from nozzleopt.errors import DomainError, OutOfDomain
from nozzleopt.geometry import NozzleDims, build_angle_profile
from nozzleopt.materials import CrossWlfParams
from nozzleopt.meshing import generate_mesh, straight_channel_profile
from nozzleopt.objective import (
    pressure_drop,
    relative_improvement,
    section_average_pressure,
)
from nozzleopt.solver import BoundaryConditions, FlowSolution, SolverConfig, solve_gnf
from nozzleopt.solver.core import AXISYM, PLANAR

DIMS = NozzleDims()

NEWTONIAN = CrossWlfParams(tau_star=1e20, n=0.25, D1=2000.0,
                           T_ref=373.0, A1=0.0, A2=51.6)


@pytest.fixture(scope="module")
def nozzle_mesh():
    return generate_mesh(build_angle_profile(DIMS, 30.0), h=0.2)


def _fake_solution(mesh, p, converged=True):
    return FlowSolution(u=np.zeros((mesh.n_nodes, 2)), p=p,
                        converged=converged, mass_balance_error=0.0)


def test_uniform_pressure_average(nozzle_mesh):
    sol = _fake_solution(nozzle_mesh, np.full(nozzle_mesh.n_nodes, 7.5))
    for mode in (AXISYM, PLANAR):
        for x in (0.0, 1.0, 9.0, 17.5, 18.0):
            assert section_average_pressure(sol, nozzle_mesh, x, mode) == \
                pytest.approx(7.5, rel=1e-12)


def test_uniform_pressure_drop_is_zero(nozzle_mesh):
    sol = _fake_solution(nozzle_mesh, np.full(nozzle_mesh.n_nodes, 3.0))
    rep = pressure_drop(sol, nozzle_mesh, DIMS, AXISYM)
    assert rep.delta_p == pytest.approx(0.0, abs=1e-9)
    assert rep.eval_x_inlet == DIMS.L_pressure
    assert rep.feasible


def test_linear_pressure_exact(nozzle_mesh):
    # linear interpolation is exact for linear fields
    a = 4.2
    sol = _fake_solution(nozzle_mesh, a * nozzle_mesh.nodes[:, 0])
    for mode in (AXISYM, PLANAR):
        got = section_average_pressure(sol, nozzle_mesh, 9.0, mode)
        assert got == pytest.approx(a * 9.0, rel=1e-9)


def test_pressure_drop_stations(nozzle_mesh):
    # drop of a linear field pins both averaging stations exactly
    a = 4.2
    sol = _fake_solution(nozzle_mesh, a * nozzle_mesh.nodes[:, 0])
    rep = pressure_drop(sol, nozzle_mesh, DIMS, AXISYM)
    span = (DIMS.L_total - 0.1) - DIMS.L_pressure
    assert rep.delta_p == pytest.approx(-a * span, rel=1e-9)


def test_average_is_linear_in_pressure(nozzle_mesh):
    rng = np.random.default_rng(0)
    p1 = rng.normal(size=nozzle_mesh.n_nodes)
    p2 = rng.normal(size=nozzle_mesh.n_nodes)
    a, b = 2.0, -3.5
    avg = lambda p: section_average_pressure(
        _fake_solution(nozzle_mesh, p), nozzle_mesh, 5.0, AXISYM)
    assert avg(a * p1 + b * p2) == pytest.approx(
        a * avg(p1) + b * avg(p2), rel=1e-9, abs=1e-12)


def test_gauge_invariance(nozzle_mesh):
    rng = np.random.default_rng(1)
    p = rng.normal(size=nozzle_mesh.n_nodes)
    r1 = pressure_drop(_fake_solution(nozzle_mesh, p), nozzle_mesh, DIMS, AXISYM)
    r2 = pressure_drop(_fake_solution(nozzle_mesh, p + 1e4),
                       nozzle_mesh, DIMS, AXISYM)
    assert r1.delta_p == pytest.approx(r2.delta_p, abs=1e-6)


def test_out_of_domain_station(nozzle_mesh):
    sol = _fake_solution(nozzle_mesh, np.zeros(nozzle_mesh.n_nodes))
    with pytest.raises(OutOfDomain):
        section_average_pressure(sol, nozzle_mesh, -1.0, AXISYM)
    with pytest.raises(OutOfDomain):
        section_average_pressure(sol, nozzle_mesh, 19.0, AXISYM)


def test_non_converged_marks_infeasible(nozzle_mesh):
    sol = _fake_solution(nozzle_mesh, np.zeros(nozzle_mesh.n_nodes),
                         converged=False)
    rep = pressure_drop(sol, nozzle_mesh, DIMS, AXISYM)
    assert not rep.feasible


def test_poiseuille_station_differences():
    # averages at two stations differ by the analytic gradient * distance
    mesh = generate_mesh(straight_channel_profile(5.0, 0.25), h=0.05)
    bc = BoundaryConditions(u_in=10.0, T_wall=373.0, T_in=373.0)
    sol = solve_gnf(mesh, bc, NEWTONIAN, SolverConfig())
    p1 = section_average_pressure(sol, mesh, 1.0, AXISYM)
    p2 = section_average_pressure(sol, mesh, 4.0, AXISYM)
    # dp/dx = 8 eta u_mean / R^2 (SI), over 3 mm
    expected = 8.0 * 2000.0 * 0.01 * 0.003 / (2.5e-4) ** 2
    assert (p1 - p2) == pytest.approx(expected, rel=0.01)


def test_relative_improvement():
    assert relative_improvement(5.0, 5.0) == 0.0
    assert relative_improvement(945.96, 1005.85) == pytest.approx(
        0.0595, abs=5e-4)
    assert relative_improvement(4153.73, 4411.27) == pytest.approx(
        0.0584, abs=5e-4)
    # invariant under uniform rescaling of both pressures
    assert relative_improvement(945.96e3, 1005.85e3) == pytest.approx(
        relative_improvement(945.96, 1005.85), rel=1e-12)
    with pytest.raises(DomainError):
        relative_improvement(1.0, 0.0)
    with pytest.raises(DomainError):
        relative_improvement(1.0, -2.0)
