import math

import numpy as np
import pytest

from nozzleopt.errors import ConstraintViolated, GeometryInfeasible
from nozzleopt.geometry import (
    ANGLE_MAX,
    ANGLE_MIN,
    AngleParams,
    NozzleDims,
    SplineParams,
    build_angle_profile,
    build_profile,
    build_spline_profile,
    monotonicity_constraints,
    seed_spline_ordinates,
    taper_length,
)

DIMS = NozzleDims()


def test_default_dims():
    assert DIMS.L_total == 18.0
    assert DIMS.L_heat == 14.66
    assert DIMS.L_out == 0.9
    assert DIMS.L_pressure == 1.0
    assert DIMS.d_in == 3.2
    assert DIMS.d_out == 0.5
    assert DIMS.r_in == 1.6
    assert DIMS.r_out == 0.25


@pytest.mark.parametrize("kwargs", [
    {"d_out": 3.2},            # d_out must be < d_in
    {"d_out": 4.0},
    {"L_out": 18.0},           # L_out must be < L_total
    {"L_heat": 19.0},          # L_heat must not exceed L_total
    {"L_pressure": 18.0},
    {"L_total": -1.0},
    {"d_in": 0.0},
])
def test_dims_invariants(kwargs):
    with pytest.raises(ValueError):
        NozzleDims(**{**{}, **kwargs})


def test_taper_length_30deg():
    # straight taper: (d_in - d_out) / (2 tan(alpha))
    lt = taper_length(DIMS, 30.0)
    assert lt == pytest.approx((1.6 - 0.25) / math.tan(math.radians(30.0)),
                               rel=1e-12)
    assert lt == pytest.approx(2.3383, abs=1e-4)
    prof = build_angle_profile(DIMS, 30.0)
    assert prof.x_contraction_start == pytest.approx(18.0 - 0.9 - lt, rel=1e-12)
    assert prof.x_contraction_start == pytest.approx(14.7617, abs=1e-4)


def test_taper_length_90deg_step():
    assert taper_length(DIMS, 90.0) == 0.0
    prof = build_angle_profile(DIMS, 90.0)
    assert prof.x_contraction_start == pytest.approx(17.1, rel=1e-12)
    # step contraction still produces a usable non-increasing profile
    xs = np.linspace(0.0, 18.0, 2001)
    rs = prof.radius(xs)
    assert np.all(np.diff(rs) <= 1e-12)


def test_taper_length_5607deg():
    lt = taper_length(DIMS, 56.07)
    assert lt == pytest.approx((1.6 - 0.25) / math.tan(math.radians(56.07)),
                               rel=1e-12)
    assert lt == pytest.approx(0.9083, abs=5e-4)


def test_angle_bounds():
    with pytest.raises(GeometryInfeasible):
        build_angle_profile(DIMS, ANGLE_MIN - 0.5)
    with pytest.raises(GeometryInfeasible):
        build_angle_profile(DIMS, ANGLE_MAX + 0.5)


def test_taper_must_fit():
    # shrink the total length so a shallow angle cannot fit
    dims = NozzleDims(L_total=3.0, L_heat=2.0, L_out=0.9, L_pressure=0.5)
    with pytest.raises(GeometryInfeasible):
        build_angle_profile(dims, 10.0)


@pytest.mark.parametrize("alpha", [10.0, 30.0, 56.07, 75.0, 90.0])
def test_profile_endpoints_and_monotone(alpha):
    prof = build_angle_profile(DIMS, alpha)
    xs = np.linspace(0.0, DIMS.L_total, 1500)
    rs = prof.radius(xs)
    assert rs[0] == pytest.approx(DIMS.r_in, abs=1e-12)
    assert rs[-1] == pytest.approx(DIMS.r_out, abs=1e-12)
    assert np.all(np.diff(rs) <= 1e-12)
    # outlet land holds r_out over the final L_out
    land = xs >= DIMS.L_total - DIMS.L_out + 1e-9
    assert np.allclose(rs[land], DIMS.r_out, atol=1e-9)


def test_spline_collinear_matches_angle():
    alpha = 30.0
    y = seed_spline_ordinates(DIMS, alpha, n_ctrl=6)
    sp = build_spline_profile(DIMS, SplineParams(alpha_scale=alpha, y_ctrl=y))
    an = build_angle_profile(DIMS, alpha)
    xs = np.linspace(0.0, DIMS.L_total, 2000)
    assert np.max(np.abs(sp.radius(xs) - an.radius(xs))) < 1e-9


def test_spline_monotone_dense_sampling():
    y = (1.6, 1.3, 1.0, 0.7, 0.4, 0.25)
    prof = build_spline_profile(DIMS, SplineParams(alpha_scale=30.0, y_ctrl=y))
    xs = np.linspace(0.0, DIMS.L_total, 1000)
    rs = prof.radius(xs)
    assert np.all(np.diff(rs) <= 1e-9)
    assert rs[0] == pytest.approx(1.6)
    assert rs[-1] == pytest.approx(0.25)


def test_spline_rejects_non_monotone():
    with pytest.raises(ConstraintViolated):
        build_spline_profile(
            DIMS, SplineParams(alpha_scale=30.0, y_ctrl=(1.6, 1.0, 1.2, 0.25)),
            degree=2)


def test_spline_rejects_bad_endpoints():
    with pytest.raises(ConstraintViolated):
        build_spline_profile(
            DIMS, SplineParams(alpha_scale=30.0,
                               y_ctrl=(1.5, 1.0, 0.7, 0.25)), degree=2)


def test_spline_needs_enough_control_points():
    with pytest.raises(ConstraintViolated):
        build_spline_profile(
            DIMS, SplineParams(alpha_scale=30.0, y_ctrl=(1.6, 0.25)), degree=3)


def test_monotonicity_constraints():
    r = monotonicity_constraints(SplineParams(50.0, (1.6, 1.0, 0.25)))
    assert np.allclose(r, [0.6, 0.75])
    assert np.all(r > 0)
    r = monotonicity_constraints(SplineParams(50.0, (1.0, 1.0)))
    assert np.allclose(r, [0.0])
    assert not np.all(r > 0)
    r = monotonicity_constraints(SplineParams(50.0, (0.5, 0.9)))
    assert np.allclose(r, [-0.4])
    assert not np.all(r > 0)


def test_profile_deterministic():
    a = build_angle_profile(DIMS, 47.3)
    b = build_angle_profile(DIMS, 47.3)
    assert np.array_equal(a.x_pts, b.x_pts)
    assert np.array_equal(a.r_pts, b.r_pts)
    y = (1.6, 1.2, 0.8, 0.5, 0.3, 0.25)
    s1 = build_spline_profile(DIMS, SplineParams(40.0, y))
    s2 = build_spline_profile(DIMS, SplineParams(40.0, y))
    assert np.array_equal(s1.x_pts, s2.x_pts)
    assert np.array_equal(s1.r_pts, s2.r_pts)


def test_build_profile_dispatch():
    a = build_profile(DIMS, AngleParams(alpha=45.0))
    b = build_angle_profile(DIMS, 45.0)
    assert np.array_equal(a.r_pts, b.r_pts)
    with pytest.raises(TypeError):
        build_profile(DIMS, object())


def test_polyline_export(tmp_path):
    prof = build_angle_profile(DIMS, 30.0)
    path = tmp_path / "profile.txt"
    prof.write_polyline(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("#")
    assert len(lines) == 2001
    x0, r0 = map(float, lines[1].split())
    assert x0 == 0.0 and r0 == pytest.approx(1.6, abs=1e-6)
