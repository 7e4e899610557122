"""Constitutive laws: Cross-WLF viscosity and the Giesekus model.

The Giesekus steady simple-shear solution is computed by two independent
routes (damped Newton on the algebraic system and a time-march of the
homogeneous ODE) so that one can serve as an oracle for the other and for
the flow solver's Couette tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, NoConvergence

# Shear-rate floor used by solvers to avoid 0^negative in power-law algebra.
GAMMA_DOT_FLOOR = 1e-10


@dataclass(frozen=True)
class CrossWlfParams:
    """Cross shear-thinning law with WLF temperature shift.

    Defaults are the PLA-like parameter set used throughout the numerical
    experiments. ``rho``, ``cp`` and ``kappa`` have no published source for
    this material set; the defaults below are placeholder values for a
    generic polymer melt and are meant to be overridden from the config.
    """

    tau_star: float = 1.009e5   # critical shear stress [Pa]
    n: float = 0.25             # power-law index [-]
    D1: float = 3.317e9         # viscosity at reference temperature [Pa s]
    T_ref: float = 373.0        # WLF reference temperature [K]
    A1: float = 20.19           # WLF coefficient [-]
    A2: float = 51.6            # WLF coefficient [K]
    rho: float = 1250.0         # density [kg/m^3] (assumed; override via config)
    cp: float = 1800.0          # specific heat [J/(kg K)] (assumed; override via config)
    kappa: float = 0.2          # thermal conductivity [W/(m K)] (assumed; override via config)

    def __post_init__(self):
        if not 0.0 < self.n < 1.0:
            raise ValueError(f"power-law index n must be in (0, 1), got {self.n}")
        for name in ("tau_star", "D1", "A2", "rho", "cp", "kappa"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class GiesekusParams:
    """Giesekus parameter set; defaults are the PLA melt values.

    ``beta`` is the solvent-to-polymeric viscosity ratio eta_s/eta_p and the
    split satisfies eta_total = eta_s + eta_p.
    """

    lam: float = 0.2            # relaxation time [s]
    alpha_g: float = 0.05       # mobility factor [-]
    beta: float = 0.15          # solvent viscosity ratio eta_s/eta_p [-]
    eta_total: float = 2000.0   # total viscosity [Pa s]
    rho: float = 1250.0         # density [kg/m^3]

    def __post_init__(self):
        if self.lam < 0.0:
            raise ValueError("relaxation time must be non-negative")
        if not 0.0 < self.alpha_g <= 0.5:
            raise ValueError("mobility factor must be in (0, 0.5]")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("solvent viscosity ratio must be in [0, 1)")
        if self.eta_total <= 0.0 or self.rho <= 0.0:
            raise ValueError("eta_total and rho must be positive")

    @property
    def eta_p(self) -> float:
        """Polymeric viscosity [Pa s]."""
        return self.eta_total / (1.0 + self.beta)

    @property
    def eta_s(self) -> float:
        """Solvent viscosity [Pa s]."""
        return self.eta_total - self.eta_p


def zero_shear_viscosity(T, p: CrossWlfParams):
    """WLF-shifted zero-shear viscosity eta0(T) [Pa s].

    Raises DomainError at or below the WLF singularity T_ref - A2.
    """
    T = np.asarray(T, dtype=float)
    dT = T - p.T_ref
    if np.any(dT <= -p.A2):
        raise DomainError(
            f"temperature at or below the WLF singularity T_ref - A2 = {p.T_ref - p.A2} K"
        )
    return p.D1 * np.exp(-p.A1 * dT / (p.A2 + dT))


def cross_viscosity(gamma_dot, T, p: CrossWlfParams):
    """Cross-WLF viscosity eta(gamma_dot, T) [Pa s]; vectorized."""
    gamma_dot = np.asarray(gamma_dot, dtype=float)
    if np.any(gamma_dot < 0.0):
        raise DomainError("shear rate must be non-negative")
    eta0 = zero_shear_viscosity(T, p)
    return eta0 / (1.0 + (eta0 * gamma_dot / p.tau_star) ** (1.0 - p.n))


def cross_viscosity_clamped(gamma_dot, T, p: CrossWlfParams, eta0_cap: float = 1e8):
    """Solver-facing Cross-WLF evaluation, robust below the WLF pole.

    Temperatures at or below T_ref - A2 (solid filament entering the hotend)
    take the capped zero-shear viscosity instead of raising; eta0 is capped
    at ``eta0_cap`` everywhere to keep the discrete system well conditioned.
    """
    gamma_dot = np.maximum(np.asarray(gamma_dot, dtype=float), GAMMA_DOT_FLOOR)
    T = np.asarray(T, dtype=float)
    dT = np.maximum(T - p.T_ref, -p.A2 + 1e-6)
    log_eta0 = np.log(p.D1) - p.A1 * dT / (p.A2 + dT)
    eta0 = np.exp(np.minimum(log_eta0, np.log(eta0_cap)))
    return eta0 / (1.0 + (eta0 * gamma_dot / p.tau_star) ** (1.0 - p.n))


def _giesekus_residual(s, gamma_dot, p: GiesekusParams):
    """Residual of the steady simple-shear algebraic system for s = (sxx, sxy, syy)."""
    sxx, sxy, syy = s
    a = p.alpha_g * p.lam / p.eta_p
    lg = p.lam * gamma_dot
    return np.array([
        sxx - 2.0 * lg * sxy + a * (sxx * sxx + sxy * sxy),
        sxy - lg * syy + a * sxy * (sxx + syy) - p.eta_p * gamma_dot,
        syy + a * (sxy * sxy + syy * syy),
    ])


def _giesekus_jacobian(s, gamma_dot, p: GiesekusParams):
    sxx, sxy, syy = s
    a = p.alpha_g * p.lam / p.eta_p
    lg = p.lam * gamma_dot
    return np.array([
        [1.0 + 2.0 * a * sxx, -2.0 * lg + 2.0 * a * sxy, 0.0],
        [a * sxy, 1.0 + a * (sxx + syy), -lg + a * sxy],
        [0.0, 2.0 * a * sxy, 1.0 + 2.0 * a * syy],
    ])


def giesekus_steady_shear(gamma_dot: float, p: GiesekusParams,
                          tol: float = 1e-12, max_iter: int = 100) -> dict:
    """Polymeric stress in steady homogeneous simple shear u = (gamma_dot*y, 0).

    Solves the 3x3 algebraic system by damped Newton iteration with
    continuation in shear rate. Returns the components as a dict with keys
    ``sigma_p_xx``, ``sigma_p_xy``, ``sigma_p_yy`` [Pa].
    """
    if gamma_dot < 0.0:
        raise DomainError("shear rate must be non-negative")
    if gamma_dot == 0.0:
        return {"sigma_p_xx": 0.0, "sigma_p_xy": 0.0, "sigma_p_yy": 0.0}
    if p.lam == 0.0:
        # Newtonian limit: sigma_p = 2 eta_p eps(u).
        return {"sigma_p_xx": 0.0, "sigma_p_xy": p.eta_p * gamma_dot, "sigma_p_yy": 0.0}

    # Walk up in shear rate so each Newton solve starts close to its root.
    n_steps = max(1, int(np.ceil(np.log10(max(p.lam * gamma_dot, 1.0)) * 8)) + 1)
    rates = gamma_dot * np.linspace(1.0 / n_steps, 1.0, n_steps)
    s = np.zeros(3)
    for g in rates:
        if np.all(s == 0.0):
            s = np.array([0.0, p.eta_p * g / (1.0 + (p.lam * g) ** 2), 0.0])
        scale = max(p.eta_p * g, 1.0)
        for _ in range(max_iter):
            r = _giesekus_residual(s, g, p)
            if np.linalg.norm(r) <= tol * scale:
                break
            step = np.linalg.solve(_giesekus_jacobian(s, g, p), -r)
            # Backtracking line search on the residual norm.
            t = 1.0
            r0 = np.linalg.norm(r)
            while t > 1e-8:
                r_new = np.linalg.norm(_giesekus_residual(s + t * step, g, p))
                if r_new < r0:
                    break
                t *= 0.5
            s = s + t * step
        else:
            raise NoConvergence(
                f"Giesekus steady-shear Newton failed at gamma_dot={g}",
                residual=float(np.linalg.norm(_giesekus_residual(s, g, p))),
            )
    return {"sigma_p_xx": float(s[0]), "sigma_p_xy": float(s[1]), "sigma_p_yy": float(s[2])}


def giesekus_steady_shear_ode(gamma_dot: float, p: GiesekusParams,
                              t_end_factor: float = 400.0) -> dict:
    """Independent oracle: time-march the homogeneous Giesekus ODE to steady state."""
    if gamma_dot < 0.0:
        raise DomainError("shear rate must be non-negative")
    if gamma_dot == 0.0 or p.lam == 0.0:
        return giesekus_steady_shear(gamma_dot, p)

    def rhs(_t, s):
        # lam * ds/dt = -residual of the steady system
        return -_giesekus_residual(s, gamma_dot, p) / p.lam

    sol = solve_ivp(rhs, (0.0, t_end_factor * p.lam), np.zeros(3),
                    method="LSODA", rtol=1e-12, atol=1e-12 * p.eta_p * gamma_dot)
    if not sol.success:
        raise NoConvergence("Giesekus ODE time-march failed")
    s = sol.y[:, -1]
    return {"sigma_p_xx": float(s[0]), "sigma_p_xy": float(s[1]), "sigma_p_yy": float(s[2])}


def giesekus_shear_viscosity(gamma_dot, p: GiesekusParams):
    """Total viscometric viscosity (solvent + polymeric) in steady shear [Pa s]."""
    gamma_dot = float(gamma_dot)
    if gamma_dot <= 0.0:
        return p.eta_total
    s = giesekus_steady_shear(gamma_dot, p)
    return p.eta_s + s["sigma_p_xy"] / gamma_dot


def weissenberg_number(p: GiesekusParams, u_char: float, l_char: float) -> float:
    """Wi = lambda * u_char / l_char; u_char and l_char in consistent units."""
    if l_char <= 0.0:
        raise DomainError("characteristic length must be positive")
    return p.lam * u_char / l_char
