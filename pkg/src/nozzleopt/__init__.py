"""Pressure-loss-minimizing shape design for FDM nozzle contractions.

The toolkit couples stabilized finite-element flow solvers (a
generalized-Newtonian Cross-WLF model with heat coupling and a planar
Giesekus viscoelastic model) to a derivative-free trust-region shape
optimizer over angle- and spline-based contraction parametrizations.
"""

from .errors import (
    ConfigError,
    ConstraintViolated,
    DomainError,
    EvaluatorFailure,
    GeometryInfeasible,
    InfeasibleStart,
    MeshFailure,
    NoConvergence,
    NozzleOptError,
    OutOfDomain,
)
from .geometry import (
    AngleParams,
    BoundaryProfile,
    NozzleDims,
    SplineParams,
    build_profile,
)
from .materials import CrossWlfParams, GiesekusParams
from .meshing import Mesh, generate_mesh
from .objective import ObjectiveReport, pressure_drop, relative_improvement
from .optimizer import (
    OptProblem,
    OptResult,
    optimize,
    optimize_angle,
    optimize_spline,
)
from .solver import (
    BoundaryConditions,
    FlowSolution,
    SolverConfig,
    solve_gnf,
    solve_viscoelastic,
)

__version__ = "0.1.0"

__all__ = [
    "AngleParams", "BoundaryConditions", "BoundaryProfile", "ConfigError",
    "ConstraintViolated", "CrossWlfParams", "DomainError", "EvaluatorFailure",
    "FlowSolution", "GeometryInfeasible", "GiesekusParams", "InfeasibleStart",
    "Mesh", "MeshFailure", "NoConvergence", "NozzleDims", "NozzleOptError",
    "ObjectiveReport", "OptProblem", "OptResult", "OutOfDomain",
    "SolverConfig", "SplineParams", "build_profile", "generate_mesh",
    "optimize", "optimize_angle", "optimize_spline", "pressure_drop",
    "relative_improvement", "solve_gnf", "solve_viscoelastic",
]
