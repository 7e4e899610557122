"""Nozzle boundary profiles: angle and spline parametrizations.

All lengths are in millimetres. The profile gives the wall radius
(axisymmetric interpretation) or channel half-height (planar interpretation)
r(x) for x in [0, L_total], with x = 0 at the inlet face.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .errors import ConstraintViolated, GeometryInfeasible

# Half-angle bounds [deg]: below ~5 deg the taper no longer fits inside
# L_total for the default dimensions; 90 deg is a flat step contraction.
ANGLE_MIN = 5.0
ANGLE_MAX = 90.0

# Minimum drop between consecutive spline ordinates [mm], keeps the
# mesh non-degenerate under the monotonicity constraint.
MONOTONE_EPS = 1e-3

_SPLINE_SAMPLES = 2001


@dataclass(frozen=True)
class NozzleDims:
    """Fixed nozzle envelope dimensions [mm]."""

    L_total: float = 18.0
    L_heat: float = 14.66
    L_out: float = 0.9
    L_pressure: float = 1.0
    d_in: float = 3.2
    d_out: float = 0.5

    def __post_init__(self):
        for name in ("L_total", "L_heat", "L_out", "L_pressure", "d_in", "d_out"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.d_out >= self.d_in:
            raise ValueError("d_out must be smaller than d_in")
        if self.L_out >= self.L_total:
            raise ValueError("L_out must be smaller than L_total")
        if self.L_heat > self.L_total:
            raise ValueError("L_heat must not exceed L_total")
        if self.L_pressure >= self.L_total:
            raise ValueError("L_pressure must be smaller than L_total")

    @property
    def r_in(self) -> float:
        return 0.5 * self.d_in

    @property
    def r_out(self) -> float:
        return 0.5 * self.d_out


@dataclass(frozen=True)
class AngleParams:
    """Single-parameter contraction: half-angle between wall and axis [deg]."""

    alpha: float


@dataclass(frozen=True)
class SplineParams:
    """Spline contraction: a shared angle scale fixes the control-point
    abscissae, the ordinates move individually (monotone decreasing)."""

    alpha_scale: float
    y_ctrl: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "y_ctrl", tuple(float(y) for y in self.y_ctrl))


ProfileParams = AngleParams | SplineParams


@dataclass(frozen=True)
class BoundaryProfile:
    """Piecewise wall curve r(x) with section markers [mm]."""

    dims: NozzleDims
    x_pts: np.ndarray
    r_pts: np.ndarray
    x_contraction_start: float
    x_contraction_end: float

    def radius(self, x):
        """Wall radius / half-height at axial coordinate(s) x [mm]."""
        return np.interp(x, self.x_pts, self.r_pts)

    def wall_slope_bound(self) -> float:
        """Max |dr/dx| over the polyline (used for mesh sizing)."""
        dx = np.diff(self.x_pts)
        dr = np.diff(self.r_pts)
        good = dx > 1e-12
        if not np.any(good):
            return 0.0
        return float(np.max(np.abs(dr[good] / dx[good])))

    def write_polyline(self, path, n_samples: int = 2000):
        """Export as plain-text (x, r) pairs in mm at 1e-6 precision."""
        xs = np.linspace(0.0, self.dims.L_total, n_samples)
        rs = self.radius(xs)
        with open(path, "w") as f:
            f.write("# x[mm] r[mm]\n")
            for x, r in zip(xs, rs):
                f.write(f"{x:.6f} {r:.6f}\n")


def taper_length(dims: NozzleDims, alpha: float) -> float:
    """Axial length of a straight taper at half-angle alpha [deg]."""
    if alpha >= 90.0:
        return 0.0
    return (dims.d_in - dims.d_out) / (2.0 * math.tan(math.radians(alpha)))


def _check_angle(dims: NozzleDims, alpha: float) -> float:
    if not ANGLE_MIN <= alpha <= ANGLE_MAX:
        raise GeometryInfeasible(
            f"half-angle {alpha} deg outside [{ANGLE_MIN}, {ANGLE_MAX}]")
    lt = taper_length(dims, alpha)
    if lt + dims.L_out > dims.L_total:
        raise GeometryInfeasible(
            f"taper of length {lt:.4f} mm at {alpha} deg does not fit inside L_total")
    return lt


def build_angle_profile(dims: NozzleDims, alpha: float) -> BoundaryProfile:
    """Straight-taper profile: constant r_in, linear taper at ``alpha``,
    constant r_out over the final L_out."""
    lt = _check_angle(dims, alpha)
    x_end = dims.L_total - dims.L_out
    x_start = x_end - lt
    if lt == 0.0:
        # Step contraction: keep a strictly increasing abscissa table.
        step = 1e-12
        x_pts = np.array([0.0, x_start, x_start + step, dims.L_total])
        r_pts = np.array([dims.r_in, dims.r_in, dims.r_out, dims.r_out])
    else:
        x_pts = np.array([0.0, x_start, x_end, dims.L_total])
        r_pts = np.array([dims.r_in, dims.r_in, dims.r_out, dims.r_out])
    return BoundaryProfile(dims, x_pts, r_pts, x_start, x_end)


def monotonicity_constraints(params: SplineParams) -> np.ndarray:
    """Linear inequality residuals y_i - y_{i+1}; feasible iff all > 0."""
    y = np.asarray(params.y_ctrl, dtype=float)
    return y[:-1] - y[1:]


def seed_spline_ordinates(dims: NozzleDims, alpha: float, n_ctrl: int = 6) -> tuple:
    """Control ordinates lying on the straight taper line of ``alpha``."""
    _check_angle(dims, alpha)
    return tuple(np.linspace(dims.r_in, dims.r_out, n_ctrl))


def build_spline_profile(dims: NozzleDims, params: SplineParams,
                         n_ctrl: int | None = None, degree: int = 3) -> BoundaryProfile:
    """Open-clamped B-spline taper.

    Control abscissae are spaced uniformly over the taper length implied by
    ``alpha_scale``; ordinates are ``params.y_ctrl``. First/last ordinates
    must equal r_in/r_out so the curve joins the straight sections (C0).
    """
    y = np.asarray(params.y_ctrl, dtype=float)
    if n_ctrl is None:
        n_ctrl = len(y)
    if len(y) != n_ctrl:
        raise ConstraintViolated(f"expected {n_ctrl} control ordinates, got {len(y)}")
    if n_ctrl < degree + 1:
        raise ConstraintViolated("need at least degree+1 control points")
    if np.any(monotonicity_constraints(params) <= 0.0):
        raise ConstraintViolated("control ordinates must be strictly decreasing")
    if np.any(y > dims.r_in + 1e-9) or np.any(y < dims.r_out - 1e-9):
        raise ConstraintViolated("control ordinates must lie within [r_out, r_in]")
    if abs(y[0] - dims.r_in) > 1e-9 or abs(y[-1] - dims.r_out) > 1e-9:
        raise ConstraintViolated(
            "first/last control ordinates must equal r_in/r_out for C0 joins")

    lt = _check_angle(dims, params.alpha_scale)
    x_end = dims.L_total - dims.L_out
    x_start = x_end - lt
    if lt == 0.0:
        # Degenerate taper: spline collapses to the step profile.
        return build_angle_profile(dims, 90.0)

    ctrl = np.column_stack([np.linspace(x_start, x_end, n_ctrl), y])
    knots = np.concatenate([
        np.zeros(degree + 1),
        np.linspace(0.0, 1.0, n_ctrl - degree + 1)[1:-1],
        np.ones(degree + 1),
    ])
    spline = BSpline(knots, ctrl, degree)
    ts = np.linspace(0.0, 1.0, _SPLINE_SAMPLES)
    pts = spline(ts)

    x_pts = np.concatenate([[0.0], pts[:, 0], [dims.L_total]])
    r_pts = np.concatenate([[dims.r_in], pts[:, 1], [dims.r_out]])
    # Clamped spline starts/ends at the first/last control point, so the
    # joins are exact; enforce strictly increasing abscissae for interp.
    dx = np.diff(x_pts)
    if np.any(dx < -1e-12):
        raise GeometryInfeasible("spline abscissae are not monotone")
    x_pts = np.maximum.accumulate(x_pts + np.arange(len(x_pts)) * 1e-15)
    return BoundaryProfile(dims, x_pts, r_pts, x_start, x_end)


def build_profile(dims: NozzleDims, params: ProfileParams,
                  n_ctrl: int | None = None, degree: int = 3) -> BoundaryProfile:
    """Dispatch on the parametrization variant."""
    if isinstance(params, AngleParams):
        return build_angle_profile(dims, params.alpha)
    if isinstance(params, SplineParams):
        return build_spline_profile(dims, params, n_ctrl=n_ctrl, degree=degree)
    raise TypeError(f"unknown profile parametrization: {type(params)!r}")
