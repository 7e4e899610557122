"""Stabilized P1/P1 finite-element flow solvers."""

from .core import BoundaryConditions, FlowSolution, SolverConfig, boundary_flux
from .gnf import solve_gnf
from .viscoelastic import solve_viscoelastic
from .diagnostics import detect_recirculation, outlet_temperature_profile

__all__ = [
    "BoundaryConditions", "FlowSolution", "SolverConfig", "boundary_flux",
    "solve_gnf", "solve_viscoelastic",
    "detect_recirculation", "outlet_temperature_profile",
]
