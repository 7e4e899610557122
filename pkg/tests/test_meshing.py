import numpy as np
import pytest
from scipy.integrate import quad

from nozzleopt.geometry import NozzleDims, build_angle_profile
from nozzleopt.meshing import (
    AXIS,
    HEATED_WALL,
    INLET,
    OUTLET,
    WALL,
    element_areas,
    element_quality,
    generate_mesh,
    mesh_statistics,
    rectangle_mesh,
    straight_channel_profile,
    write_mesh_text,
    write_vtk,
)

DIMS = NozzleDims()


@pytest.fixture(scope="module")
def nozzle_mesh():
    return generate_mesh(build_angle_profile(DIMS, 30.0), h=0.1)


def test_straight_channel_euler_formula():
    prof = straight_channel_profile(length=4.0, radius=1.0)
    mesh = generate_mesh(prof, h=0.25)
    edges = set()
    for a, b, c in mesh.elements:
        for e in ((a, b), (b, c), (c, a)):
            edges.add(tuple(sorted(e)))
    # planar triangulation of a disk-like domain: V - E + F = 1
    assert mesh.n_nodes - len(edges) + mesh.n_elements == 1


def test_boundary_edges_form_closed_loop():
    prof = straight_channel_profile(length=4.0, radius=1.0)
    mesh = generate_mesh(prof, h=0.25)
    # each boundary node is entered exactly once and left exactly once
    starts = [a for a, _ in mesh.boundary_edges]
    ends = [b for _, b in mesh.boundary_edges]
    assert sorted(starts) == sorted(ends)
    assert len(set(starts)) == len(starts)


def test_nozzle_mesh_quality_and_orientation(nozzle_mesh):
    areas = element_areas(nozzle_mesh.nodes, nozzle_mesh.elements)
    assert np.all(areas > 0.0)
    assert element_quality(nozzle_mesh.nodes, nozzle_mesh.elements).min() >= 0.2


def test_nozzle_mesh_nodes_inside_domain(nozzle_mesh):
    prof = build_angle_profile(DIMS, 30.0)
    x = nozzle_mesh.nodes[:, 0]
    y = nozzle_mesh.nodes[:, 1]
    assert np.all(x >= -1e-9) and np.all(x <= DIMS.L_total + 1e-9)
    assert np.all(y >= -1e-9)
    assert np.all(y <= prof.radius(x) + 1e-9)


def test_area_matches_profile_integral(nozzle_mesh):
    prof = build_angle_profile(DIMS, 30.0)
    exact, _ = quad(prof.radius, 0.0, DIMS.L_total,
                    points=[prof.x_contraction_start, prof.x_contraction_end])
    total = element_areas(nozzle_mesh.nodes, nozzle_mesh.elements).sum()
    assert abs(total - exact) / exact < 1e-3


def test_boundary_tags(nozzle_mesh):
    nodes = nozzle_mesh.nodes
    tags = set(nozzle_mesh.boundary_tags)
    assert tags == {INLET, OUTLET, WALL, HEATED_WALL, AXIS}
    for (a, b), tag in zip(nozzle_mesh.boundary_edges, nozzle_mesh.boundary_tags):
        xm = 0.5 * (nodes[a, 0] + nodes[b, 0])
        ym = 0.5 * (nodes[a, 1] + nodes[b, 1])
        if tag == INLET:
            assert xm < 1e-6
        elif tag == OUTLET:
            assert xm > DIMS.L_total - 1e-6
        elif tag == AXIS:
            assert ym < 1e-6
        elif tag == HEATED_WALL:
            assert xm >= DIMS.L_total - DIMS.L_heat - 1e-9


def test_mesh_statistics_unit_square():
    mesh = rectangle_mesh(1.0, 1.0, 1.0)
    stats = mesh_statistics(mesh)
    assert stats["n_nodes"] == 4
    assert stats["n_elements"] == 2
    q = element_quality(mesh.nodes, mesh.elements)
    assert q[0] == pytest.approx(q[1], rel=1e-12)


def test_mesh_statistics_grading(nozzle_mesh):
    stats = mesh_statistics(nozzle_mesh)
    assert stats["n_nodes"] > 100
    assert stats["min_quality"] >= 0.2
    # near-contraction refinement: smallest edge about h * grading
    assert stats["h_min"] <= 0.1 * 0.5 * 1.2


def test_mesh_deterministic():
    prof = build_angle_profile(DIMS, 47.0)
    m1 = generate_mesh(prof, h=0.2)
    m2 = generate_mesh(prof, h=0.2)
    assert np.array_equal(m1.nodes, m2.nodes)
    assert np.array_equal(m1.elements, m2.elements)


def test_generate_mesh_validates_inputs():
    prof = build_angle_profile(DIMS, 30.0)
    with pytest.raises(ValueError):
        generate_mesh(prof, h=-0.1)
    with pytest.raises(ValueError):
        generate_mesh(prof, h=0.1, grading=0.0)


def test_write_mesh_text(tmp_path):
    mesh = rectangle_mesh(1.0, 1.0, 0.5)
    path = tmp_path / "mesh.txt"
    write_mesh_text(mesh, path)
    lines = path.read_text().splitlines()
    assert lines[0] == f"nodes {mesh.n_nodes}"
    assert f"elements {mesh.n_elements}" in lines
    assert f"edges {len(mesh.boundary_edges)}" in lines


def test_write_vtk(tmp_path):
    mesh = rectangle_mesh(1.0, 1.0, 0.5)
    path = tmp_path / "mesh.vtk"
    write_vtk(path, mesh, {"p": np.zeros(mesh.n_nodes),
                           "u": np.zeros((mesh.n_nodes, 2))})
    text = path.read_text()
    assert "UNSTRUCTURED_GRID" in text
    assert f"POINTS {mesh.n_nodes} double" in text
    assert "SCALARS p" in text
    assert "VECTORS u" in text
