"""Discrete bulk-surface function-space toolkit.

Pairs of nodal vectors over the disk and its boundary loop, the generalized
mean and its projection, the coupled H1 bilinear form with Robin-type
exchange weighted by chi(L) = 1/L, and the constrained elliptic solver that
realizes the inverse operator behind the dual norms.  L = 0 identifies the
boundary trace with the surface unknown (one shared value per boundary
node) instead of penalizing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import splu

from .mesh import DiskMesh

TRACE_TOL = 1e-9
MEAN_TOL = 1e-10


@dataclass(frozen=True)
class Coupling:
    """Kinetic coefficient L >= 0; chi = 1/L for L > 0, 0 for L = 0."""

    L: float

    def __post_init__(self):
        if self.L < 0.0:
            raise ValueError(f"coupling coefficient must be >= 0, got {self.L}")

    @property
    def chi(self) -> float:
        return 1.0 / self.L if self.L > 0.0 else 0.0

    @property
    def trace_identified(self) -> bool:
        return self.L == 0.0


@dataclass
class BulkSurfaceField:
    """A pair (bulk nodal vector, surface nodal vector)."""

    bulk: np.ndarray
    surf: np.ndarray

    def copy(self) -> "BulkSurfaceField":
        return BulkSurfaceField(self.bulk.copy(), self.surf.copy())

    def __add__(self, other):
        return BulkSurfaceField(self.bulk + other.bulk, self.surf + other.surf)

    def __sub__(self, other):
        return BulkSurfaceField(self.bulk - other.bulk, self.surf - other.surf)

    def __mul__(self, a: float):
        return BulkSurfaceField(a * self.bulk, a * self.surf)

    __rmul__ = __mul__

    @staticmethod
    def constant(value: float, mesh: DiskMesh) -> "BulkSurfaceField":
        return BulkSurfaceField(
            np.full(mesh.n_bulk, float(value)), np.full(mesh.n_surf, float(value))
        )

    @staticmethod
    def zeros(mesh: DiskMesh) -> "BulkSurfaceField":
        return BulkSurfaceField(np.zeros(mesh.n_bulk), np.zeros(mesh.n_surf))


def generalized_mean(f: BulkSurfaceField, mesh: DiskMesh) -> float:
    """(sum_w f_bulk + sum_s f_surf) / (sum_w + sum_s)."""
    num = mesh.wb @ f.bulk + mesh.ws @ f.surf
    return float(num / (mesh.wb.sum() + mesh.ws.sum()))


def project(f: BulkSurfaceField, mesh: DiskMesh) -> BulkSurfaceField:
    """Subtract the generalized mean from both components (idempotent)."""
    m = generalized_mean(f, mesh)
    return BulkSurfaceField(f.bulk - m, f.surf - m)


def l2_inner(f: BulkSurfaceField, g: BulkSurfaceField, mesh: DiskMesh) -> float:
    """Consistent-mass L2 pairing of two field pairs."""
    return float(f.bulk @ (mesh.mass_b @ g.bulk) + f.surf @ (mesh.mass_s @ g.surf))


def l2_norm(f: BulkSurfaceField, mesh: DiskMesh) -> float:
    return float(np.sqrt(max(l2_inner(f, f, mesh), 0.0)))


def linf_norm(f: BulkSurfaceField) -> float:
    bulk = float(np.abs(f.bulk).max()) if f.bulk.size else 0.0
    surf = float(np.abs(f.surf).max()) if f.surf.size else 0.0
    return max(bulk, surf)


def _require_trace_match(u: BulkSurfaceField, mesh: DiskMesh, what: str):
    gap = float(np.abs(u.bulk[mesh.boundary] - u.surf).max())
    scale = 1.0 + float(np.abs(u.surf).max(initial=0.0))
    if gap > TRACE_TOL * scale:
        raise ValueError(
            f"{what}: trace-identified mode requires surf == trace(bulk); max gap {gap:.3e}"
        )


def coupling_form(
    u: BulkSurfaceField, v: BulkSurfaceField, coupling: Coupling, mesh: DiskMesh
) -> float:
    """Gradient pairing in bulk and on the loop plus the chi(L) Robin term."""
    if coupling.trace_identified:
        _require_trace_match(u, mesh, "coupling_form")
        _require_trace_match(v, mesh, "coupling_form")
    out = u.bulk @ (mesh.stiff_b @ v.bulk) + u.surf @ (mesh.stiff_s @ v.surf)
    if coupling.chi > 0.0:
        ju = u.bulk[mesh.boundary] - u.surf
        jv = v.bulk[mesh.boundary] - v.surf
        out += coupling.chi * (ju @ (mesh.ws * jv))
    return float(out)


def h1_coupled_norm(u: BulkSurfaceField, coupling: Coupling, mesh: DiskMesh) -> float:
    """Norm induced by the coupled form (a norm on zero-mean fields)."""
    return float(np.sqrt(max(coupling_form(u, u, coupling, mesh), 0.0)))


def trace_matrix(mesh: DiskMesh) -> sps.csr_matrix:
    """Sparse selector from bulk vectors to boundary-ordered vectors."""
    ns, nb = mesh.n_surf, mesh.n_bulk
    return sps.coo_matrix(
        (np.ones(ns), (np.arange(ns), mesh.boundary)), shape=(ns, nb)
    ).tocsr()


def coupled_operator(coupling: Coupling, mesh: DiskMesh) -> sps.csr_matrix:
    """Matrix of the coupled form on stacked (bulk, surf) unknowns.

    In trace-identified mode the unknowns reduce to the bulk vector and the
    operator is K_bulk + T' K_surf T.
    """
    t = trace_matrix(mesh)
    if coupling.trace_identified:
        return (mesh.stiff_b + t.T @ mesh.stiff_s @ t).tocsr()
    chi = coupling.chi
    sw = sps.diags(mesh.ws)
    a11 = mesh.stiff_b + chi * (t.T @ sw @ t)
    a12 = -chi * (t.T @ sw)
    a22 = mesh.stiff_s + chi * sw
    return sps.bmat([[a11, a12], [a12.T, a22]], format="csr")


class EllipticSolver:
    """Inverse of the coupled elliptic operator on zero-mean data.

    The zero-mean constraint is enforced by a single Lagrange multiplier
    row/column; the sparse factorization is computed once and reused for
    every right-hand side (the operator does not change in time).
    """

    def __init__(self, mesh: DiskMesh, coupling: Coupling):
        self.mesh = mesh
        self.coupling = coupling
        self.operator = coupled_operator(coupling, mesh)
        if coupling.trace_identified:
            weights = mesh.wb.copy()
            weights[mesh.boundary] += mesh.ws
        else:
            weights = np.concatenate([mesh.wb, mesh.ws])
        self.weights = weights
        n = weights.size
        col = sps.coo_matrix((weights, (np.arange(n), np.zeros(n, dtype=int))), shape=(n, 1))
        saddle = sps.bmat([[self.operator, col], [col.T, None]], format="csc")
        self._lu = splu(saddle)
        self.poincare: float | None = None

    def _rhs(self, y: BulkSurfaceField) -> np.ndarray:
        rb = self.mesh.mass_b @ y.bulk
        rs = self.mesh.mass_s @ y.surf
        if self.coupling.trace_identified:
            r = rb.copy()
            r[self.mesh.boundary] += rs
            return r
        return np.concatenate([rb, rs])

    def solve(self, y: BulkSurfaceField) -> BulkSurfaceField:
        """Weak solution u with the coupled form tested by every basis pair.

        Requires |generalized mean of y| <= 1e-10; the solution has zero
        generalized mean.
        """
        m = generalized_mean(y, self.mesh)
        if abs(m) > MEAN_TOL:
            raise ValueError(f"right-hand side must have zero generalized mean, got {m:.3e}")
        rhs = np.concatenate([self._rhs(y), [0.0]])
        sol = self._lu.solve(rhs)
        u = sol[:-1]
        if self.coupling.trace_identified:
            return BulkSurfaceField(u, u[self.mesh.boundary].copy())
        nb = self.mesh.n_bulk
        return BulkSurfaceField(u[:nb], u[nb:])

    def dual_norm0(self, y: BulkSurfaceField) -> float:
        """Dual norm of zero-mean data: sqrt(form(u, u)) for u = solve(y)."""
        u = self.solve(y)
        return h1_coupled_norm(u, self.coupling, self.mesh)

    def dual_norm(self, y: BulkSurfaceField) -> float:
        """General dual norm: projected part plus the mean contribution."""
        m = generalized_mean(y, self.mesh)
        p = BulkSurfaceField(y.bulk - m, y.surf - m)
        d0 = self.dual_norm0(p)
        return float(np.sqrt(d0 * d0 + m * m))

    def fit_poincare(self, n_samples: int = 200, seed: int = 0) -> float:
        """Smallest observed constant C with ||y||_L2 <= C ||y||_{H1 coupled}."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n_samples):
            b = rng.standard_normal(self.mesh.n_bulk)
            if self.coupling.trace_identified:
                f = BulkSurfaceField(b, b[self.mesh.boundary].copy())
            else:
                f = BulkSurfaceField(b, rng.standard_normal(self.mesh.n_surf))
            f = project(f, self.mesh)
            denom = h1_coupled_norm(f, self.coupling, self.mesh)
            if denom == 0.0:
                continue
            worst = max(worst, l2_norm(f, self.mesh) / denom)
        self.poincare = worst
        return worst
