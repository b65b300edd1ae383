"""Stationary states: constrained Newton solve and tail diagnostics.

The steady problem fixes the generalized mean and closes with one scalar
multiplier, the common constant value of both chemical potentials.  The
solver is a damped dense Newton (the convolution blocks are dense anyway at
desk scale); the default initial guess is the terminal state of a long
evolution, which plays the role of continuation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evolve import SolverError, Snapshot, Trajectory, energy
from .kernels import KernelPair
from .mesh import DiskMesh
from .potentials import LogPotential
from .spaces import (
    BulkSurfaceField,
    generalized_mean,
    l2_norm,
    linf_norm,
    project,
)


@dataclass
class SteadyState:
    phi_inf: BulkSurfaceField
    mu_inf: float
    residual: float
    sep_gap: float
    iterations: int = 0


def _stationarity(phi: BulkSurfaceField, kp: KernelPair, pot) -> BulkSurfaceField:
    """Nodewise stationarity expression whose constant value is mu_inf."""
    eb = kp.cov_bulk * phi.bulk - kp.conv_bulk @ phi.bulk \
        + pot.convex_d(phi.bulk) + pot.smooth_d(phi.bulk)
    es = kp.cov_surf * phi.surf - kp.conv_surf @ phi.surf \
        + pot.convex_d(phi.surf) + pot.smooth_d(phi.surf)
    return BulkSurfaceField(eb, es)


def solve_steady(mass: float, guess: BulkSurfaceField, kp: KernelPair, pot,
                 mesh: DiskMesh, tol: float = 1e-10, max_iter: int = 80,
                 margin: float = 1e-9) -> SteadyState:
    """Newton on the mass-constrained stationary system.

    Unknowns are the phase pair plus the constant multiplier; the residual
    stacks the nodewise stationarity defects and the mean constraint.
    """
    if not -1.0 < mass < 1.0:
        raise ValueError(f"target mean must lie in (-1, 1), got {mass}")
    if getattr(pot, "singular", False) and linf_norm(guess) >= 1.0:
        raise ValueError("steady guess must be strictly separated")

    nb, ns = mesh.n_bulk, mesh.n_surf
    total = mesh.wb.sum() + mesh.ws.sum()
    mrow = np.concatenate([mesh.wb, mesh.ws]) / total

    phi_b = guess.bulk.copy()
    phi_s = guess.surf.copy()
    expr = _stationarity(BulkSurfaceField(phi_b, phi_s), kp, pot)
    mu = float(generalized_mean(expr, mesh))

    def residual(pb, ps, mu_c):
        e = _stationarity(BulkSurfaceField(pb, ps), kp, pot)
        rm = mrow @ np.concatenate([pb, ps]) - mass
        return np.concatenate([e.bulk - mu_c, e.surf - mu_c, [rm]])

    cap = 1.0 - margin
    r = residual(phi_b, phi_s, mu)
    rnorm = float(np.abs(r).max())
    history = [rnorm]
    iters = 0
    for it in range(max_iter):
        if rnorm <= tol:
            iters = it
            break
        jb = np.diag(kp.cov_bulk + pot.convex_dd(phi_b) + pot.smooth_dd(phi_b)) - kp.conv_bulk
        js = np.diag(kp.cov_surf + pot.convex_dd(phi_s) + pot.smooth_dd(phi_s)) - kp.conv_surf
        jac = np.zeros((nb + ns + 1, nb + ns + 1))
        jac[:nb, :nb] = jb
        jac[nb:nb + ns, nb:nb + ns] = js
        jac[:nb + ns, -1] = -1.0
        jac[-1, :nb + ns] = mrow
        dx = np.linalg.solve(jac, -r)
        alpha = 1.0
        while True:
            pb = phi_b + alpha * dx[:nb]
            ps = phi_s + alpha * dx[nb:nb + ns]
            mu_t = mu + alpha * dx[-1]
            ok = (not getattr(pot, "singular", False)) or max(
                np.abs(pb).max(), np.abs(ps).max()
            ) <= cap
            if ok:
                rt = residual(pb, ps, mu_t)
                rn = float(np.abs(rt).max())
                if rn < rnorm or rn <= tol:
                    break
            alpha *= 0.5
            if alpha < 1e-12:
                raise SolverError(
                    "steady Newton stalled; try continuation from a longer evolution",
                    0.0, history,
                )
        phi_b, phi_s, mu, r, rnorm = pb, ps, mu_t, rt, rn
        history.append(rnorm)
    else:
        raise SolverError("steady Newton did not converge", 0.0, history)

    phi = BulkSurfaceField(phi_b, phi_s)
    return SteadyState(
        phi_inf=phi,
        mu_inf=mu,
        residual=rnorm,
        sep_gap=1.0 - linf_norm(phi),
        iterations=iters,
    )


def averaging_identities(ss: SteadyState, kp: KernelPair, pot, mesh: DiskMesh) -> tuple:
    """Defects of the two average characterizations of the multiplier."""
    expr = _stationarity(ss.phi_inf, kp, pot)
    bulk_avg = float(mesh.wb @ expr.bulk / mesh.wb.sum())
    surf_avg = float(mesh.ws @ expr.surf / mesh.ws.sum())
    return abs(bulk_avg - ss.mu_inf), abs(surf_avg - ss.mu_inf)


@dataclass
class GradientReport:
    max_discrepancy: float
    linf_gradient: float
    min_denominator: float
    denominator_floor: float
    passed: bool


def check_steady_gradient(ss: SteadyState, kp: KernelPair, pot, mesh: DiskMesh) -> GradientReport:
    """Compare the FE gradient of the steady state against the closed form.

    The stationary equation gives the gradient as (grad-kernel convolution
    minus coverage-gradient term) over (coverage + convex + smooth
    curvature); the denominator must stay above the validated margin.
    """
    xy = mesh.nodes
    phi = ss.phi_inf.bulk
    diff = xy[:, None, :] - xy[None, :, :]
    gx, gy = kp.j_spec.grad(diff[:, :, 0], diff[:, :, 1])
    gx *= mesh.wb[None, :]
    gy *= mesh.wb[None, :]
    conv_gx, conv_gy = gx @ phi, gy @ phi
    cov_gx, cov_gy = gx.sum(axis=1), gy.sum(axis=1)
    denom = kp.cov_bulk + pot.convex_dd(phi) + pot.smooth_dd(phi)
    rhs = np.stack([(conv_gx - cov_gx * phi), (conv_gy - cov_gy * phi)], axis=1) / denom[:, None]

    # P1 gradient per triangle vs nodal closed form averaged over the triangle
    tris = mesh.triangles
    p = xy[tris]
    b = np.stack([p[:, 1, 1] - p[:, 2, 1], p[:, 2, 1] - p[:, 0, 1], p[:, 0, 1] - p[:, 1, 1]], axis=1)
    c = np.stack([p[:, 2, 0] - p[:, 1, 0], p[:, 0, 0] - p[:, 2, 0], p[:, 1, 0] - p[:, 0, 0]], axis=1)
    area2 = p[:, 0, 0] * b[:, 0] + p[:, 1, 0] * b[:, 1] + p[:, 2, 0] * b[:, 2]
    vals = phi[tris]
    fe_grad = np.stack(
        [(vals * b).sum(axis=1) / area2, (vals * c).sum(axis=1) / area2], axis=1
    )
    rhs_tri = rhs[tris].mean(axis=1)
    disc = float(np.abs(fe_grad - rhs_tri).max())

    alpha = pot.convexity_floor
    floor = kp.a_min_bulk + alpha - pot.smooth_lipschitz
    dmin = float(denom.min())
    return GradientReport(
        max_discrepancy=disc,
        linf_gradient=float(np.abs(rhs).max()),
        min_denominator=dmin,
        denominator_floor=floor,
        passed=dmin >= floor - 1e-12 and floor > 0.0,
    )


@dataclass
class LojasiewiczFit:
    applicable: bool
    gamma: float = 0.0
    constant: float = 0.0
    n_points: int = 0
    tight: bool = False
    note: str = ""


def lojasiewicz_fit(traj: Trajectory, ss: SteadyState, kp: KernelPair, pot,
                    mesh: DiskMesh, tail_fraction: float = 0.5,
                    converge_tol: float = 1e-2) -> LojasiewiczFit:
    """Fit the largest exponent in the energy-slope inequality over the tail.

    Over tail snapshots, |E - E_inf|^(1-gamma) <= C ||mu - mean(mu)||_L2 is
    fitted from the log-log slope; diagnostic only (the inequality is an
    existence statement near the limit state).
    """
    if not traj.snapshots:
        return LojasiewiczFit(applicable=False, note="no snapshots recorded")
    term = traj.snapshots[-1]
    if l2_norm(term.phi - ss.phi_inf, mesh) > converge_tol:
        return LojasiewiczFit(applicable=False, note="trajectory not converged to the steady state")

    e_inf = energy(ss.phi_inf, kp, pot, mesh)
    t_min = tail_fraction * term.t
    des, rs = [], []
    for snap in traj.snapshots:
        if snap.t < t_min:
            continue
        de = abs(energy(snap.phi, kp, pot, mesh) - e_inf)
        r = l2_norm(project(snap.mu, mesh), mesh)
        if de > 1e-14 and r > 1e-14:
            des.append(de)
            rs.append(r)
    if len(des) < 3:
        # tail indistinguishable from the steady state: any exponent works
        return LojasiewiczFit(applicable=True, gamma=0.5, constant=0.0,
                              n_points=len(des), tight=False, note="at steady state")
    des = np.asarray(des)
    rs = np.asarray(rs)
    slope = float(np.polyfit(np.log(des), np.log(rs), 1)[0])
    gamma = float(min(0.5, max(1.0 - slope, 1e-3)))
    const = float(np.max(des ** (1.0 - gamma) / rs))
    gamma_hi = gamma + 0.2
    tight = bool(np.any(des ** (1.0 - gamma_hi) / rs > const * (1.0 + 1e-9)))
    return LojasiewiczFit(applicable=True, gamma=gamma, constant=const,
                          n_points=len(des), tight=tight)


@dataclass
class SmoothingReport:
    at_steady_state: bool
    ratio: float = np.inf
    sup_linf: float = 0.0
    sup_l2: float = 0.0


def smoothing_ratio(traj: Trajectory, ss: SteadyState, tau: float, mesh: DiskMesh) -> SmoothingReport:
    """sup_{t>=2 tau} Linf distance over the squared sup_{t>=tau} L2 distance."""
    linfs = [linf_norm(s.phi - ss.phi_inf) for s in traj.snapshots if s.t >= 2.0 * tau]
    l2s = [l2_norm(s.phi - ss.phi_inf, mesh) for s in traj.snapshots if s.t >= tau]
    if not linfs or not l2s:
        raise ValueError("trajectory snapshots must cover [tau, 2 tau] and beyond")
    num = max(linfs)
    den = max(l2s) ** 2
    if den < 1e-28:
        return SmoothingReport(at_steady_state=True, sup_linf=num, sup_l2=max(l2s))
    return SmoothingReport(at_steady_state=False, ratio=num / den,
                           sup_linf=num, sup_l2=max(l2s))
