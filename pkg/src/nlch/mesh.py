"""Unit-disk geometry and the assembled local operators.

The mesh is a ring lattice on the unit disk triangulated with Delaunay
(the disk is convex, so the hull of the point set is exactly the outer
ring).  Bulk operators are standard P1 mass/stiffness on triangles; the
circle carries a periodic P1 pair on the polygonal boundary loop.  The
boundary nodes of the bulk mesh *are* the surface nodes, in angular order,
so the trace map is a pure index selection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
from scipy.spatial import Delaunay


@dataclass(frozen=True)
class DiskMesh:
    """Triangulated unit disk with an ordered boundary loop.

    Attributes:
        nodes: (n_bulk, 2) coordinates.
        triangles: (n_tri, 3) index triples.
        boundary: (n_surf,) bulk indices of boundary nodes, ordered by angle
            (cyclic); doubles as the trace map.
        h: max edge length.
        mass_b, stiff_b: consistent P1 mass / stiffness on the bulk (CSR).
        mass_s, stiff_s: periodic P1 mass / stiffness on the loop (CSR).
        wb, ws: lumped weights (mass row sums); sum(wb) ~ pi, sum(ws) ~ 2 pi.
        boundary_angles: polar angle of each boundary node.
        tangents: (n_surf, 2) unit tangents of the circle at boundary nodes.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    h: float
    mass_b: sps.csr_matrix = field(repr=False)
    stiff_b: sps.csr_matrix = field(repr=False)
    mass_s: sps.csr_matrix = field(repr=False)
    stiff_s: sps.csr_matrix = field(repr=False)
    wb: np.ndarray = field(repr=False)
    ws: np.ndarray = field(repr=False)
    boundary_angles: np.ndarray = field(repr=False)
    tangents: np.ndarray = field(repr=False)

    @property
    def n_bulk(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_surf(self) -> int:
        return self.boundary.shape[0]

    def trace(self, bulk_values: np.ndarray) -> np.ndarray:
        """Restrict a bulk nodal vector to the boundary loop order."""
        return bulk_values[self.boundary]


def _disk_points(n_rings: int) -> tuple[np.ndarray, int]:
    """Ring lattice: center node plus 6k nodes on ring k (radius k/n)."""
    pts = [(0.0, 0.0)]
    for k in range(1, n_rings + 1):
        r = k / n_rings
        m = 6 * k
        ang = 2.0 * np.pi * np.arange(m) / m
        pts.extend(zip(r * np.cos(ang), r * np.sin(ang)))
    return np.asarray(pts, dtype=np.float64), 6 * n_rings


def _assemble_bulk(nodes: np.ndarray, tris: np.ndarray):
    p = nodes[tris]  # (nt, 3, 2)
    x, y = p[:, :, 0], p[:, :, 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area2 = x[:, 0] * b[:, 0] + x[:, 1] * b[:, 1] + x[:, 2] * b[:, 2]
    area = 0.5 * np.abs(area2)

    k_loc = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (
        4.0 * area[:, None, None]
    )
    m_base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    m_loc = area[:, None, None] * m_base[None, :, :]

    rows = np.repeat(tris, 3, axis=1).reshape(-1)
    cols = np.tile(tris, (1, 3)).reshape(-1)
    n = nodes.shape[0]
    stiff = sps.coo_matrix((k_loc.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()
    mass = sps.coo_matrix((m_loc.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()
    return mass, stiff, area


def _assemble_surface(loop_xy: np.ndarray):
    m = loop_xy.shape[0]
    nxt = np.roll(np.arange(m), -1)
    ell = np.linalg.norm(loop_xy[nxt] - loop_xy, axis=1)

    i0 = np.arange(m)
    rows = np.concatenate([i0, nxt, i0, nxt])
    cols = np.concatenate([i0, nxt, nxt, i0])
    k_vals = np.concatenate([1.0 / ell, 1.0 / ell, -1.0 / ell, -1.0 / ell])
    m_vals = np.concatenate([ell / 3.0, ell / 3.0, ell / 6.0, ell / 6.0])
    stiff = sps.coo_matrix((k_vals, (rows, cols)), shape=(m, m)).tocsr()
    mass = sps.coo_matrix((m_vals, (rows, cols)), shape=(m, m)).tocsr()
    return mass, stiff


def build_disk_mesh(n_refine: int) -> DiskMesh:
    """Quasi-uniform triangulation of the unit disk; h halves per level."""
    if n_refine < 0:
        raise ValueError(f"refinement level must be >= 0, got {n_refine}")
    n_rings = 4 * 2**n_refine
    nodes, n_surf = _disk_points(n_rings)
    tri = Delaunay(nodes)
    tris = np.asarray(tri.simplices, dtype=np.int64)

    boundary = np.arange(nodes.shape[0] - n_surf, nodes.shape[0], dtype=np.int64)
    # outer-ring nodes sit exactly on the unit circle in angular order
    ang = np.arctan2(nodes[boundary, 1], nodes[boundary, 0])

    mass_b, stiff_b, _ = _assemble_bulk(nodes, tris)
    mass_s, stiff_s = _assemble_surface(nodes[boundary])

    edges = nodes[tris] - nodes[np.roll(tris, 1, axis=1)]
    h = float(np.max(np.linalg.norm(edges, axis=2)))

    wb = np.asarray(mass_b.sum(axis=1)).ravel()
    ws = np.asarray(mass_s.sum(axis=1)).ravel()
    tangents = np.stack([-np.sin(ang), np.cos(ang)], axis=1)

    return DiskMesh(
        nodes=nodes,
        triangles=tris,
        boundary=boundary,
        h=h,
        mass_b=mass_b,
        stiff_b=stiff_b,
        mass_s=mass_s,
        stiff_s=stiff_s,
        wb=wb,
        ws=ws,
        boundary_angles=ang,
        tangents=tangents,
    )


def h1_seminorm_bulk(values: np.ndarray, mesh: DiskMesh) -> float:
    """sqrt(v^T K v) over the bulk; 0 for constants."""
    v = np.asarray(values, dtype=np.float64)
    if v.shape != (mesh.n_bulk,):
        raise ValueError(f"expected bulk vector of length {mesh.n_bulk}, got shape {v.shape}")
    return float(np.sqrt(max(v @ (mesh.stiff_b @ v), 0.0)))


def h1_seminorm_surf(values: np.ndarray, mesh: DiskMesh) -> float:
    """sqrt(v^T K v) over the boundary loop; 0 for constants."""
    v = np.asarray(values, dtype=np.float64)
    if v.shape != (mesh.n_surf,):
        raise ValueError(f"expected surface vector of length {mesh.n_surf}, got shape {v.shape}")
    return float(np.sqrt(max(v @ (mesh.stiff_s @ v), 0.0)))


def dump_mesh(mesh: DiskMesh, path: str) -> None:
    """Plain-text node/triangle listing (one record per line) for debugging."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"nodes {mesh.n_bulk} triangles {mesh.triangles.shape[0]} boundary {mesh.n_surf}\n")
        for x, y in mesh.nodes:
            f.write(f"{x:.17g} {y:.17g}\n")
        for a, b, c in mesh.triangles:
            f.write(f"{a} {b} {c}\n")
        f.write(" ".join(str(i) for i in mesh.boundary) + "\n")
