"""Exception types shared across the toolkit."""


class NozzleOptError(Exception):
    """Base class for all toolkit errors."""


class GeometryInfeasible(NozzleOptError):
    """Requested profile does not fit inside the nozzle envelope."""


class ConstraintViolated(NozzleOptError):
    """Parametrization violates a manufacturability constraint."""


class MeshFailure(NozzleOptError):
    """Mesh generation could not meet the element-quality floor."""


class DomainError(NozzleOptError):
    """Input lies outside the mathematical domain of a material law."""


class NoConvergence(NozzleOptError):
    """Nonlinear iteration failed to reach the requested tolerance."""

    def __init__(self, message, residual=None, history=None, stage=None):
        super().__init__(message)
        self.residual = residual
        self.history = history if history is not None else []
        self.stage = stage


class OutOfDomain(NozzleOptError):
    """Requested evaluation station lies outside the flow domain."""


class InfeasibleStart(NozzleOptError):
    """Optimizer starting point violates bounds or constraints."""


class EvaluatorFailure(NozzleOptError):
    """Black-box objective evaluation failed (recorded, not fatal)."""


class ConfigError(NozzleOptError):
    """Experiment configuration could not be parsed or validated."""

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations) if violations else [message]
