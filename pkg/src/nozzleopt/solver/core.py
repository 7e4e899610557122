"""Shared P1 assembly machinery for the flow solvers.

Equal-order linear interpolation for all fields with residual-based
stabilization (PSPG on continuity, SUPG on transport). Geometry enters in
millimetres and is converted to SI once; solutions are converted back to
mm/s at the interface.

Degree-of-freedom layout for the velocity-pressure system:
ux: [0, N), uy: [N, 2N), p: [2N, 3N).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..meshing import Mesh, INLET, OUTLET, WALL, HEATED_WALL, AXIS

MM = 1e-3  # mm -> m

AXISYM = "axisym"
PLANAR = "planar"


@dataclass
class BoundaryConditions:
    """Boundary data for a solve.

    ``u_in`` is the uniform inlet axial velocity (feeding rate) [mm/s].
    ``T_wall``/``T_in`` apply to the GNF path only. ``velocity_overrides``
    maps a boundary tag to a prescribed (ux, uy) [mm/s], used e.g. for
    moving-wall Couette verification.
    """

    u_in: float
    T_wall: float = 503.0
    T_in: float = 293.0
    velocity_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.u_in < 0.0:
            raise ValueError("feeding rate must be non-negative")


@dataclass
class SolverConfig:
    mode: str = AXISYM                 # AXISYM (GNF) or PLANAR (Giesekus)
    tol_nl: float = 1e-6               # relative nonlinear residual
    max_iters: int = 200
    relaxation: float = 0.7            # Picard under-relaxation
    pspg_alpha: float = 1.0 / 12.0     # tau = alpha h^2 / eta
    include_advection: bool = True     # rho u.grad(u), treated explicitly
    include_dissipation: bool = True   # viscous heating source in the heat eq
    eta0_cap: float = 1e8              # zero-shear viscosity cap [Pa s]
    stress_relaxation: float = 0.5     # under-relaxation on polymeric stress
    continuation: list | None = None   # [(lam, alpha_g), ...]; None = default
    stress_diffusion: float = 0.5      # artificial stress diffusion, x h_e^2
    verbose: bool = False              # per-iteration convergence trace

    def __post_init__(self):
        if not 0.0 < self.relaxation <= 1.0:
            raise ValueError("relaxation must be in (0, 1]")
        if self.tol_nl <= 0.0:
            raise ValueError("tol_nl must be positive")


@dataclass
class FlowSolution:
    """Discrete solution fields plus convergence metadata.

    u is nodal velocity [mm/s], p nodal pressure [Pa]; T [K] on the GNF
    path, sigma_p (N, 3) = (xx, xy, yy) polymeric stress [Pa] on the
    viscoelastic path.
    """

    u: np.ndarray
    p: np.ndarray
    T: np.ndarray | None = None
    sigma_p: np.ndarray | None = None
    converged: bool = False
    residual_history: list = field(default_factory=list)
    continuation_trace: list = field(default_factory=list)
    mass_balance_error: float = float("nan")


class P1Grid:
    """Precomputed P1 element geometry in SI units."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.nodes = mesh.nodes * MM
        self.tri = mesh.elements
        self.n = len(self.nodes)
        p = self.nodes[self.tri]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        self.area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        if np.any(self.area <= 0):
            raise ValueError("mesh contains non-positive element areas")
        # Gradients of the three nodal basis functions, shape (M, 3, 2).
        inv2a = 1.0 / (2.0 * self.area)
        gx = np.stack([p[:, 1, 1] - p[:, 2, 1],
                       p[:, 2, 1] - p[:, 0, 1],
                       p[:, 0, 1] - p[:, 1, 1]], axis=1)
        gy = np.stack([p[:, 2, 0] - p[:, 1, 0],
                       p[:, 0, 0] - p[:, 2, 0],
                       p[:, 1, 0] - p[:, 0, 0]], axis=1)
        self.grad = np.stack([gx, gy], axis=2) * inv2a[:, None, None]
        self.centroid = p.mean(axis=1)
        self.h_e = np.sqrt(2.0 * self.area)

    def to_centroid(self, nodal):
        """Average a nodal field (N,) or (N, k) onto element centroids."""
        return np.asarray(nodal)[self.tri].mean(axis=1)

    def grad_field(self, nodal):
        """Element-constant gradient of a nodal scalar field, shape (M, 2)."""
        return np.einsum("mi,mid->md", np.asarray(nodal)[self.tri], self.grad)

    def strain_rate(self, u):
        """Element strain-rate components (eps_xx, eps_xy, eps_yy), u in m/s."""
        gux = self.grad_field(u[:, 0])
        guy = self.grad_field(u[:, 1])
        return gux[:, 0], 0.5 * (gux[:, 1] + guy[:, 0]), guy[:, 1]

    def gamma_dot(self, u, mode: str):
        """Shear rate sqrt(2 eps:eps) per element [1/s]."""
        exx, exy, eyy = self.strain_rate(u)
        s = 2.0 * (exx ** 2 + eyy ** 2 + 2.0 * exy ** 2)
        if mode == AXISYM:
            uyc = self.to_centroid(u[:, 1])
            s = s + 2.0 * (uyc / self.centroid[:, 1]) ** 2
        return np.sqrt(np.maximum(s, 0.0))


# consistent P1 mass matrix on the reference of each element: A/12 * (1+delta)
_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0
_THIRD = np.full(3, 1.0 / 3.0)


def _accumulate(blocks, n_blocks_rows, n_blocks_cols, grid):
    """Assemble a sparse matrix from per-element dense blocks.

    ``blocks`` maps (I, J) block position to an (M, 3, 3) array of element
    contributions; block (I, J) couples dof slices [I*n, (I+1)*n).
    """
    n = grid.n
    tri = grid.tri
    rows, cols, vals = [], [], []
    ii = np.repeat(tri, 3, axis=1)          # (M, 9) row node ids
    jj = np.tile(tri, (1, 3))               # (M, 9) col node ids
    for (bi, bj), blk in blocks.items():
        rows.append((ii + bi * n).ravel())
        cols.append((jj + bj * n).ravel())
        vals.append(blk.reshape(len(tri), 9).ravel())
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_blocks_rows * n, n_blocks_cols * n))
    return A.tocsr()


def _outer(a, b):
    """(M,3) x (M,3) -> (M,3,3) outer products per element."""
    return a[:, :, None] * b[:, None, :]


def stokes_matrix(grid: P1Grid, eta_e: np.ndarray, mode: str,
                  pspg_alpha: float) -> sp.csr_matrix:
    """Viscous + pressure-gradient + continuity + PSPG blocks, SI units.

    ``eta_e`` is the element viscosity [Pa s]. Axisymmetric mode weights
    the integrals by the centroid radius and adds the hoop-strain terms.
    """
    A = grid.area
    bx = grid.grad[:, :, 0]
    by = grid.grad[:, :, 1]
    w = grid.centroid[:, 1] if mode == AXISYM else np.ones(len(A))
    eaw = eta_e * A * w

    kxx = eaw[:, None, None] * (2.0 * _outer(bx, bx) + _outer(by, by))
    kyy = eaw[:, None, None] * (_outer(bx, bx) + 2.0 * _outer(by, by))
    kxy = eaw[:, None, None] * _outer(by, bx)
    kyx = eaw[:, None, None] * _outer(bx, by)

    aw = (A * w)[:, None, None]
    ones3 = np.broadcast_to(_THIRD, (len(A), 3))
    gxp = -aw * _outer(bx, ones3)
    gyp = -aw * _outer(by, ones3)
    dpx = aw * _outer(ones3, bx)
    dpy = aw * _outer(ones3, by)

    if mode == AXISYM:
        mass = A[:, None, None] * _MASS[None]
        # hoop strain 2 eta u_y v_y / y^2, weighted by y
        kyy = kyy + (2.0 * eta_e * A / grid.centroid[:, 1])[:, None, None] * _MASS[None]
        # pressure coupling from div term u_y / y (weighted by y)
        gyp = gyp - mass
        dpy = dpy + mass

    tau = pspg_alpha * grid.h_e ** 2 / eta_e
    cpp = (tau * A * w)[:, None, None] * (_outer(bx, bx) + _outer(by, by))

    return _accumulate({(0, 0): kxx, (0, 1): kxy, (1, 0): kyx, (1, 1): kyy,
                        (0, 2): gxp, (1, 2): gyp,
                        (2, 0): dpx, (2, 1): dpy, (2, 2): cpp},
                       3, 3, grid)


def stress_divergence_rhs(grid: P1Grid, sig_e: np.ndarray, mode: str) -> np.ndarray:
    """RHS contribution -int sigma : eps(v) for an element stress field.

    ``sig_e`` has shape (M, 3) = (xx, xy, yy) [Pa] (plus (M, 4) with a hoop
    component in axisymmetric mode). Returns a (3N,) vector (pressure rows 0).
    """
    A = grid.area
    bx = grid.grad[:, :, 0]
    by = grid.grad[:, :, 1]
    w = grid.centroid[:, 1] if mode == AXISYM else np.ones(len(A))
    aw = (A * w)[:, None]
    fx = -aw * (sig_e[:, 0:1] * bx + sig_e[:, 1:2] * by)
    fy = -aw * (sig_e[:, 1:2] * bx + sig_e[:, 2:3] * by)
    if mode == AXISYM and sig_e.shape[1] > 3:
        # hoop stress: -int sigma_tt v_y / y * y dA = -int sigma_tt v_y dA
        fy = fy - (A * sig_e[:, 3] / 3.0)[:, None]
    rhs = np.zeros(3 * grid.n)
    np.add.at(rhs, grid.tri, fx)
    np.add.at(rhs, grid.tri + grid.n, fy)
    return rhs


def advection_rhs(grid: P1Grid, u: np.ndarray, rho: float, mode: str) -> np.ndarray:
    """Explicit -rho (u . grad u, v) contribution, u in m/s; (3N,) vector."""
    uc = grid.to_centroid(u)
    gux = grid.grad_field(u[:, 0])
    guy = grid.grad_field(u[:, 1])
    ax = uc[:, 0] * gux[:, 0] + uc[:, 1] * gux[:, 1]
    ay = uc[:, 0] * guy[:, 0] + uc[:, 1] * guy[:, 1]
    w = grid.centroid[:, 1] if mode == AXISYM else np.ones(len(grid.area))
    coef = rho * grid.area * w / 3.0
    rhs = np.zeros(3 * grid.n)
    np.add.at(rhs, grid.tri, np.repeat((-coef * ax)[:, None], 3, axis=1))
    np.add.at(rhs, grid.tri + grid.n, np.repeat((-coef * ay)[:, None], 3, axis=1))
    return rhs


def apply_dirichlet(A: sp.csr_matrix, b: np.ndarray, fixed: np.ndarray,
                    values: np.ndarray):
    """Eliminate Dirichlet dofs symmetrically; returns (A_mod, b_mod)."""
    n = A.shape[0]
    x = np.zeros(n)
    x[fixed] = values
    keep = np.ones(n)
    keep[fixed] = 0.0
    Dk = sp.diags(keep)
    b_mod = keep * (b - A @ x) + x
    A_mod = Dk @ A @ Dk + sp.diags(1.0 - keep)
    return A_mod.tocsc(), b_mod


def velocity_dirichlet(mesh: Mesh, bc: BoundaryConditions):
    """(dof indices, values) for the velocity Dirichlet set, SI units.

    Priority at shared corner nodes: walls (no-slip / override) beat the
    inlet profile; inlet beats outlet/axis.
    """
    n = len(mesh.nodes)
    ux_val, uy_val = {}, {}

    def set_nodes(nodes, ux=None, uy=None):
        for nd in nodes:
            if ux is not None:
                ux_val[nd] = ux
            if uy is not None:
                uy_val[nd] = uy

    # lowest priority first; later writes win. The inlet wins its corner
    # against the wall so the plug profile carries the full flux (the plug
    # velocity is tangential to the wall there, so the wall stays sealed).
    set_nodes(mesh.nodes_with_tag(AXIS), uy=0.0)
    set_nodes(mesh.nodes_with_tag(OUTLET), uy=0.0)
    for tag in (WALL, HEATED_WALL):
        ov = bc.velocity_overrides.get(tag, (0.0, 0.0))
        set_nodes(mesh.nodes_with_tag(tag), ux=ov[0] * MM, uy=ov[1] * MM)
    set_nodes(mesh.nodes_with_tag(INLET), ux=bc.u_in * MM, uy=0.0)

    idx = np.array([*ux_val.keys(), *[n + k for k in uy_val.keys()]], dtype=int)
    val = np.array([*ux_val.values(), *uy_val.values()])
    return idx, val


def boundary_flux(mesh: Mesh, u: np.ndarray, tag: str, mode: str) -> float:
    """Volumetric flux of u [mm/s] through the tagged boundary [mm^3/s].

    Axisymmetric flux is per radian (2*pi omitted); planar flux is per unit
    depth. Exact for the P1 velocity field.
    """
    edges = mesh.edges_with_tag(tag)
    total = 0.0
    for a, b in edges:
        pa, pb = mesh.nodes[a], mesh.nodes[b]
        nrm = np.array([pb[1] - pa[1], pa[0] - pb[0]])  # edge normal * length
        ua = u[a] @ nrm
        ub = u[b] @ nrm
        if mode == AXISYM:
            ya, yb = pa[1], pb[1]
            # int over edge of (u.n) y ds with linear u.n and y
            total += (ua * (2 * ya + yb) + ub * (ya + 2 * yb)) / 6.0
        else:
            total += 0.5 * (ua + ub)
    return float(total)


def mass_balance_error(mesh: Mesh, u: np.ndarray, mode: str) -> float:
    """|Q_in + Q_out| / |Q_in| with outward-normal fluxes."""
    q_in = boundary_flux(mesh, u, INLET, mode)
    q_out = boundary_flux(mesh, u, OUTLET, mode)
    if q_in == 0.0:
        return 0.0 if q_out == 0.0 else float("inf")
    return abs(q_in + q_out) / abs(q_in)


def solve_sparse(A: sp.csc_matrix, b: np.ndarray) -> np.ndarray:
    return spla.spsolve(A, b)


def relative_change(new: np.ndarray, old: np.ndarray) -> float:
    denom = np.linalg.norm(new)
    if denom == 0.0:
        return float(np.linalg.norm(new - old) > 0.0)
    return float(np.linalg.norm(new - old) / denom)
