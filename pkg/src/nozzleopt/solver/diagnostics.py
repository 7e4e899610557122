"""Post-processing diagnostics on converged flow fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph

from ..meshing import Mesh, OUTLET


@dataclass
class RecirculationRegion:
    """Connected pocket of reversed axial flow."""

    area: float            # [mm^2]
    centroid: np.ndarray   # (2,) [mm]
    n_elements: int


def detect_recirculation(mesh: Mesh, u: np.ndarray, u_ref: float,
                         rel_tol: float = 1e-4,
                         min_area_frac: float = 1e-4) -> list:
    """Find connected element regions with reversed axial velocity.

    An element counts as reversed when its centroid axial velocity is below
    ``-rel_tol * u_ref`` (``u_ref`` is a characteristic speed, e.g. the
    feeding rate). Regions smaller than ``min_area_frac`` of the domain are
    discarded as noise. Returns regions sorted by area, largest first.
    """
    ux_e = u[mesh.elements, 0].mean(axis=1)
    rev = ux_e < -rel_tol * abs(u_ref)
    if not np.any(rev):
        return []

    idx = np.flatnonzero(rev)
    pos = {e: k for k, e in enumerate(idx)}
    # adjacency through shared edges among reversed elements
    edge_owner = {}
    rows, cols = [], []
    for e in idx:
        tri = mesh.elements[e]
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            if key in edge_owner:
                other = edge_owner[key]
                rows.extend((pos[e], pos[other]))
                cols.extend((pos[other], pos[e]))
            else:
                edge_owner[key] = e
    adj = sp.coo_matrix((np.ones(len(rows)), (rows, cols)),
                        shape=(len(idx), len(idx)))
    n_comp, labels = csgraph.connected_components(adj, directed=False)

    p = mesh.nodes[mesh.elements]
    areas = 0.5 * np.abs(
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    centroids = p.mean(axis=1)
    total_area = float(areas.sum())

    regions = []
    for c in range(n_comp):
        members = idx[labels == c]
        area = float(areas[members].sum())
        if area < min_area_frac * total_area:
            continue
        ctr = (centroids[members] * areas[members, None]).sum(axis=0) / area
        regions.append(RecirculationRegion(area=area, centroid=ctr,
                                           n_elements=len(members)))
    regions.sort(key=lambda r: r.area, reverse=True)
    return regions


def outlet_temperature_profile(mesh: Mesh, T: np.ndarray):
    """Temperature along the outlet boundary, ordered by radius.

    Returns (y, T) arrays [mm, K].
    """
    nodes = mesh.nodes_with_tag(OUTLET)
    if len(nodes) == 0:
        raise ValueError("mesh has no outlet boundary")
    order = np.argsort(mesh.nodes[nodes, 1])
    nodes = nodes[order]
    return mesh.nodes[nodes, 1].copy(), np.asarray(T)[nodes].copy()
