"""Boundary-conforming triangular meshing of the nozzle half-domain.

Deterministic variant of the force-equilibrium (distmesh-style) scheme:
boundary points are placed once by arclength metric integration and stay
fixed; interior points are seeded on a graded hex-like lattice and relaxed
by bar forces under repeated Delaunay retriangulation. No randomness.

Coordinates are in millimetres; x is axial, y is radial (axisymmetric) or
transverse (planar). The mesh covers {0 <= x <= L_total, 0 <= y <= r(x)}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay

from .errors import MeshFailure
from .geometry import BoundaryProfile, NozzleDims

INLET = "inlet"
OUTLET = "outlet"
WALL = "wall"
HEATED_WALL = "heated_wall"
AXIS = "axis"

ALL_TAGS = (INLET, OUTLET, WALL, HEATED_WALL, AXIS)


@dataclass
class Mesh:
    """Triangular mesh with tagged boundary edges.

    nodes: (N, 2) coordinates [mm]; elements: (M, 3) node triples with
    positive orientation; boundary_edges: (K, 2) node pairs; boundary_tags:
    (K,) tag strings; h: requested characteristic size [mm].
    """

    nodes: np.ndarray
    elements: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    h: float

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def edges_with_tag(self, tag: str) -> np.ndarray:
        return self.boundary_edges[self.boundary_tags == tag]

    def nodes_with_tag(self, tag: str) -> np.ndarray:
        return np.unique(self.edges_with_tag(tag))


def element_areas(nodes: np.ndarray, elements: np.ndarray) -> np.ndarray:
    """Signed areas; positive for counterclockwise orientation."""
    p = nodes[elements]
    return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))


def element_quality(nodes: np.ndarray, elements: np.ndarray) -> np.ndarray:
    """Scaled inradius/circumradius ratio; 1 for equilateral triangles."""
    p = nodes[elements]
    a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
    c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = (b + c - a) * (c + a - b) * (a + b - c) / (a * b * c)
    return np.nan_to_num(q, nan=0.0)


def _metric_place(points: np.ndarray, hfun) -> np.ndarray:
    """Distribute points along a polyline so neighbour spacing tracks hfun.

    The polyline is integrated in the metric ds/h(s); output points are the
    metric-uniform subdivision (endpoints included).
    """
    seg = np.diff(points, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = s[-1]
    if total <= 0.0:
        return points[[0, -1]]
    # Fine resampling for the metric integral.
    n_fine = max(64, int(np.ceil(total / (0.05 * max(np.min(hfun(points)), 1e-6)))))
    n_fine = min(n_fine, 20000)
    sf = np.linspace(0.0, total, n_fine)
    xf = np.interp(sf, s, points[:, 0])
    yf = np.interp(sf, s, points[:, 1])
    hf = hfun(np.column_stack([xf, yf]))
    dm = np.diff(sf) / (0.5 * (hf[1:] + hf[:-1]))
    m = np.concatenate([[0.0], np.cumsum(dm)])
    n_pts = max(1, int(round(m[-1])))
    targets = np.linspace(0.0, m[-1], n_pts + 1)
    s_out = np.interp(targets, m, sf)
    return np.column_stack([np.interp(s_out, s, points[:, 0]),
                            np.interp(s_out, s, points[:, 1])])


def _split_at_corners(poly: np.ndarray, min_turn_deg: float = 5.0):
    """Split a polyline at vertices where the direction turns sharply.

    Keeping sharp vertices as fixed mesh nodes pins the discrete geometry
    (taper start, taper/land junction) exactly; otherwise the resampled
    wall cuts the corner by a mesh-dependent chord and the flow resistance
    jitters under remeshing.
    """
    if len(poly) < 3:
        return [poly]
    seg = np.diff(poly, axis=0)
    ln = np.linalg.norm(seg, axis=1)
    ln = np.maximum(ln, 1e-14)
    d = seg / ln[:, None]
    cos_turn = np.sum(d[:-1] * d[1:], axis=1)
    breaks = np.nonzero(cos_turn < np.cos(np.radians(min_turn_deg)))[0] + 1
    idx = np.concatenate([[0], breaks, [len(poly) - 1]])
    return [poly[idx[i]:idx[i + 1] + 1] for i in range(len(idx) - 1)]


def _place_with_corners(poly: np.ndarray, hfun) -> np.ndarray:
    parts = [_metric_place(p, hfun) for p in _split_at_corners(poly)]
    out = parts[0]
    for piece in parts[1:]:
        out = np.vstack([out[:-1], piece])
    return out


def _boundary_points(profile: BoundaryProfile, hfun):
    """Fixed points on the four boundary sides, without duplicated corners.

    Returns (points, side) where side in {0: axis, 1: outlet, 2: wall, 3: inlet}.
    """
    L = profile.x_pts[-1]
    r0 = profile.radius(0.0)
    rL = profile.radius(L)

    axis = _metric_place(np.array([[0.0, 0.0], [L, 0.0]]), hfun)
    outlet = _metric_place(np.array([[L, 0.0], [L, rL]]), hfun)
    # Wall follows the profile polyline from outlet back to inlet.
    wall_poly = np.column_stack([profile.x_pts[::-1], profile.r_pts[::-1]])
    wall = _place_with_corners(wall_poly, hfun)
    inlet = _metric_place(np.array([[0.0, r0], [0.0, 0.0]]), hfun)

    pts, side = [], []
    for i, loop_side in enumerate((axis, outlet, wall, inlet)):
        pts.append(loop_side[:-1])  # drop shared corner
        side.append(np.full(len(loop_side) - 1, i))
    return np.vstack(pts), np.concatenate(side)


def _seed_interior(profile: BoundaryProfile, hfun) -> np.ndarray:
    """Graded hex-like lattice of interior points."""
    L = profile.x_pts[-1]
    # Column abscissae by metric integration of 1/h along the axis.
    xf = np.linspace(0.0, L, 4000)
    hf = hfun(np.column_stack([xf, np.zeros_like(xf)]))
    # row spacing factor sqrt(3)/2 for hex packing
    m = np.concatenate([[0.0], np.cumsum(np.diff(xf) / (0.5 * (hf[1:] + hf[:-1]) * np.sqrt(3) / 2))])
    n_cols = max(1, int(round(m[-1])))
    xc = np.interp(np.arange(1, n_cols), m, xf)
    out = []
    for k, x in enumerate(xc):
        r = profile.radius(x)
        hloc = float(hfun(np.array([[x, 0.0]]))[0])
        n_y = int(round(r / hloc))
        if n_y < 2:
            continue
        ys = (np.arange(1, n_y) + (0.5 if k % 2 else 0.0)) * r / n_y
        ys = ys[(ys > 0.45 * hloc) & (ys < r - 0.45 * hloc)]
        out.append(np.column_stack([np.full(len(ys), x), ys]))
    if not out:
        return np.empty((0, 2))
    return np.vstack(out)


def _inside_triangles(nodes, tris, profile, tol):
    c = nodes[tris].mean(axis=1)
    r = profile.radius(c[:, 0])
    return (c[:, 1] > tol) & (c[:, 1] < r - tol)


def _triangulate(points, profile, tol):
    tris = Delaunay(points).simplices
    tris = tris[_inside_triangles(points, tris, profile, tol)]
    # Drop degenerate slivers that survive the centroid test.
    q = element_quality(points, tris)
    tris = tris[q > 1e-3]
    a = element_areas(points, tris)
    flip = a < 0
    tris[flip] = tris[flip][:, ::-1]
    return tris


def _bar_edges(tris):
    e = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0)


def make_sizing(profile: BoundaryProfile, h: float, grading: float):
    """Axial sizing field: base size h, graded down to h*grading near the
    contraction and outlet land, capped so the channel keeps >= ~3 cells."""
    x_cs = profile.x_contraction_start
    ramp = max(1.0, 6.0 * h)

    def hfun(p):
        x = np.atleast_2d(p)[:, 0]
        t = np.clip((x - (x_cs - ramp)) / ramp, 0.0, 1.0)
        size = h * (1.0 - (1.0 - grading) * t)
        cap = np.maximum(profile.radius(x) / 3.0, 0.25 * h * grading)
        return np.minimum(size, cap)

    return hfun


def generate_mesh(profile: BoundaryProfile, dims: NozzleDims | None = None,
                  h: float = 0.1, grading: float = 0.5,
                  heat_offset: float = 0.0, quality_floor: float = 0.2,
                  max_iter: int = 80) -> Mesh:
    """Mesh the half-domain under ``profile`` at characteristic size ``h`` [mm].

    Raises MeshFailure when the element-quality floor cannot be met, which
    signals a degenerate profile to the optimizer.
    """
    if h <= 0.0:
        raise ValueError("element size h must be positive")
    if not 0.0 < grading <= 1.0:
        raise ValueError("grading must be in (0, 1]")
    if dims is None:
        dims = profile.dims

    hfun = make_sizing(profile, h, grading)
    fixed, _ = _boundary_points(profile, hfun)
    interior = _seed_interior(profile, hfun)
    n_fixed = len(fixed)
    pts = np.vstack([fixed, interior]) if len(interior) else fixed.copy()

    L = profile.x_pts[-1]
    tol = 1e-9
    fscale = 1.2
    deltat = 0.2
    tris = _triangulate(pts, profile, 1e-6)
    for _ in range(max_iter):
        bars = _bar_edges(tris)
        vec = pts[bars[:, 0]] - pts[bars[:, 1]]
        blen = np.linalg.norm(vec, axis=1)
        mid = 0.5 * (pts[bars[:, 0]] + pts[bars[:, 1]])
        l0 = fscale * hfun(mid)
        # Scale target lengths to conserve total bar "mass" (distmesh).
        l0 = l0 * np.sqrt(np.sum(blen ** 2) / np.sum(l0 ** 2))
        f = np.maximum(l0 - blen, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            fvec = vec * (f / np.maximum(blen, 1e-14))[:, None]
        force = np.zeros_like(pts)
        np.add.at(force, bars[:, 0], fvec)
        np.add.at(force, bars[:, 1], -fvec)
        force[:n_fixed] = 0.0
        move = deltat * force
        pts = pts + move
        # Keep interior points strictly inside the domain band.
        xi = pts[n_fixed:, 0]
        hi = hfun(pts[n_fixed:])
        np.clip(xi, 0.35 * hi, L - 0.35 * hi, out=xi)
        ri = profile.radius(xi)
        pts[n_fixed:, 1] = np.clip(pts[n_fixed:, 1], 0.35 * hi,
                                   ri - 0.35 * hi)
        tris = _triangulate(pts, profile, 1e-6)
        max_move = np.max(np.linalg.norm(move[n_fixed:], axis=1)) if len(pts) > n_fixed else 0.0
        if max_move < 0.005 * h:
            break

    # Drop nodes that ended up unused (outside-only points).
    used = np.unique(tris)
    remap = -np.ones(len(pts), dtype=int)
    remap[used] = np.arange(len(used))
    nodes = pts[used]
    elements = remap[tris]

    edges, tags = _tag_boundary(nodes, elements, dims, heat_offset, tol)
    mesh = Mesh(nodes=nodes, elements=elements, boundary_edges=edges,
                boundary_tags=tags, h=h)

    q_min = float(np.min(element_quality(nodes, elements)))
    if q_min < quality_floor:
        raise MeshFailure(
            f"minimum element quality {q_min:.3f} below floor {quality_floor}")
    if np.any(element_areas(nodes, elements) <= 0.0):
        raise MeshFailure("degenerate element with non-positive area")
    return mesh


def _tag_boundary(nodes, elements, dims: NozzleDims, heat_offset, tol):
    e = np.vstack([elements[:, [0, 1]], elements[:, [1, 2]], elements[:, [2, 0]]])
    es = np.sort(e, axis=1)
    # Keep the directed (CCW-triangle) orientation so the outward normal of
    # edge a->b is the right-rotated edge vector.
    _, inv, counts = np.unique(es, axis=0, return_inverse=True, return_counts=True)
    bedges = e[counts[inv] == 1]
    mid = 0.5 * (nodes[bedges[:, 0]] + nodes[bedges[:, 1]])
    L = dims.L_total
    heat_start = L - dims.L_heat - heat_offset
    tags = np.empty(len(bedges), dtype=object)
    for i, (mx, my) in enumerate(mid):
        if mx < tol:
            tags[i] = INLET
        elif mx > L - tol:
            tags[i] = OUTLET
        elif my < tol:
            tags[i] = AXIS
        elif mx >= heat_start - 1e-9:
            tags[i] = HEATED_WALL
        else:
            tags[i] = WALL
    return bedges, tags.astype(str)


def mesh_statistics(mesh: Mesh) -> dict:
    """Exact node/element counts and quality/size extrema."""
    p = mesh.nodes[mesh.elements]
    edge_len = np.concatenate([
        np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
        np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
        np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
    ])
    return {
        "n_nodes": mesh.n_nodes,
        "n_elements": mesh.n_elements,
        "min_quality": float(np.min(element_quality(mesh.nodes, mesh.elements))),
        "h_min": float(np.min(edge_len)),
        "h_max": float(np.max(edge_len)),
    }


def write_mesh_text(mesh: Mesh, path):
    """Plain-text node / element / tagged-edge tables."""
    with open(path, "w") as f:
        f.write(f"nodes {mesh.n_nodes}\n")
        for x, y in mesh.nodes:
            f.write(f"{x:.9f} {y:.9f}\n")
        f.write(f"elements {mesh.n_elements}\n")
        for a, b, c in mesh.elements:
            f.write(f"{a} {b} {c}\n")
        f.write(f"edges {len(mesh.boundary_edges)}\n")
        for (a, b), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
            f.write(f"{a} {b} {tag}\n")


def write_vtk(path, mesh: Mesh, point_data: dict | None = None):
    """Legacy ASCII VTK unstructured grid, with optional nodal fields.

    Scalar fields are (N,) arrays; (N, 2) arrays are written as 3D vectors
    with zero z-component.
    """
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\nnozzleopt mesh\nASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {mesh.n_nodes} double\n")
        for x, y in mesh.nodes:
            f.write(f"{x:.9e} {y:.9e} 0.0\n")
        f.write(f"CELLS {mesh.n_elements} {4 * mesh.n_elements}\n")
        for a, b, c in mesh.elements:
            f.write(f"3 {a} {b} {c}\n")
        f.write(f"CELL_TYPES {mesh.n_elements}\n")
        f.write("\n".join(["5"] * mesh.n_elements) + "\n")
        if point_data:
            f.write(f"POINT_DATA {mesh.n_nodes}\n")
            for name, arr in point_data.items():
                arr = np.asarray(arr)
                if arr.ndim == 1:
                    f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                    for v in arr:
                        f.write(f"{v:.9e}\n")
                else:
                    f.write(f"VECTORS {name} double\n")
                    for row in arr:
                        z = row[2] if len(row) > 2 else 0.0
                        f.write(f"{row[0]:.9e} {row[1]:.9e} {z:.9e}\n")


def rectangle_mesh(lx: float, ly: float, h: float,
                   tags: dict | None = None) -> Mesh:
    """Structured right-triangle mesh of [0, lx] x [0, ly].

    ``tags`` maps the sides "left", "right", "bottom", "top" to boundary
    tag strings (defaults: inlet, outlet, axis, wall). Used by the
    verification flows (Couette, plane channel) where the organic mesher
    is unnecessary.
    """
    tags = {"left": INLET, "right": OUTLET, "bottom": AXIS, "top": WALL,
            **(tags or {})}
    nx = max(1, int(round(lx / h)))
    ny = max(1, int(round(ly / h)))
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return i * (ny + 1) + j

    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b = nid(i, j), nid(i + 1, j)
            c, d = nid(i + 1, j + 1), nid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    elements = np.array(tris, dtype=int)

    bedges, btags = [], []
    for j in range(ny):
        bedges.append((nid(0, j + 1), nid(0, j)))
        btags.append(tags["left"])
        bedges.append((nid(nx, j), nid(nx, j + 1)))
        btags.append(tags["right"])
    for i in range(nx):
        bedges.append((nid(i, 0), nid(i + 1, 0)))
        btags.append(tags["bottom"])
        bedges.append((nid(i + 1, ny), nid(i, ny)))
        btags.append(tags["top"])
    return Mesh(nodes=nodes, elements=elements,
                boundary_edges=np.array(bedges, dtype=int),
                boundary_tags=np.array(btags), h=h)


def straight_channel_profile(length: float, radius: float) -> BoundaryProfile:
    """Constant-radius channel, used by verification flows and tests."""
    dims = NozzleDims(L_total=length, L_heat=length * 0.5, L_out=length * 0.1,
                      L_pressure=length * 0.1, d_in=2.0 * radius, d_out=radius)
    x_pts = np.array([0.0, length])
    r_pts = np.array([radius, radius])
    return BoundaryProfile(dims, x_pts, r_pts, length * 0.45, length * 0.9)
