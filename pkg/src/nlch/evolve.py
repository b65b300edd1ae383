"""Energy-stable time stepping for the coupled bulk-surface flow.

One backward-Euler step with convex-concave splitting: the coverage term
and the singular convex slope are implicit, the convolution and the smooth
quench slope are explicit.  Tested against the lumped quadrature that also
defines the discrete energy, this decreases the energy unconditionally.

The nonlinear step is solved in chemical-potential unknowns: the phase
update is an explicit affine image of the potential pair, so the combined
lumped mass is conserved exactly (up to matvec rounding) no matter where
Newton stops.  In trace-identified mode (L = 0) the boundary potential is
stored once per boundary node and shared between bulk trace and surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import splu

from .kernels import KernelPair
from .mesh import DiskMesh
from .potentials import (
    LogPotential,
    SeparationError,
    YosidaState,
    epsilon_star_bound,
    yosida_convex,
    yosida_d,
    yosida_dd,
)
from .spaces import (
    BulkSurfaceField,
    Coupling,
    coupled_operator,
    coupling_form,
    generalized_mean,
    linf_norm,
    trace_matrix,
)


class SolverError(RuntimeError):
    """Nonlinear step failure; carries the residual history of the attempt."""

    def __init__(self, message: str, t: float, history: list):
        self.t = t
        self.history = list(history)
        super().__init__(f"{message} (t={t:.6g}, residuals={self.history})")


@dataclass(frozen=True)
class SchemeConfig:
    """Time-stepping parameters.

    mode is 'singular' (solve with the true logarithmic slope) or 'yosida'
    (Lipschitz regularization with parameter epsilon < epsilon_star).
    safeguard_margin keeps Newton trials inside |s| <= 1 - margin.
    """

    dt: float
    t_end: float
    mode: str = "singular"
    epsilon: float = 0.02
    newton_tol: float = 1e-12
    newton_max_iter: int = 60
    safeguard_margin: float = 1e-6

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.mode not in ("singular", "yosida"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not (0.0 < self.safeguard_margin < 0.5):
            raise ValueError("safeguard_margin must lie in (0, 0.5)")


@dataclass
class DiagRecord:
    t: float
    mean: float
    energy: float
    dissipation: float
    sep_gap: float
    linf_phi: float
    newton_iters: int
    eq_residual: float

    COLUMNS = ("t", "mean", "energy", "dissipation", "sep_gap", "linf_phi",
               "newton_iters", "eq_residual")

    def row(self) -> tuple:
        return (self.t, self.mean, self.energy, self.dissipation, self.sep_gap,
                self.linf_phi, self.newton_iters, self.eq_residual)


@dataclass
class StepState:
    t: float
    phi: BulkSurfaceField
    mu: BulkSurfaceField
    diag: DiagRecord | None = None


@dataclass
class Snapshot:
    t: float
    phi: BulkSurfaceField
    mu: BulkSurfaceField


@dataclass
class Trajectory:
    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    final: StepState | None = None


def energy(phi: BulkSurfaceField, kp: KernelPair, pot, mesh: DiskMesh,
           ys: YosidaState | None = None) -> float:
    """Lumped quadrature of the free energy (regularized convex part if ys)."""
    if ys is None:
        conv_b = pot.convex(phi.bulk)
        conv_s = pot.convex(phi.surf)
    else:
        conv_b = yosida_convex(phi.bulk, pot, ys)
        conv_s = yosida_convex(phi.surf, pot, ys)
    eb = mesh.wb @ (
        0.5 * kp.cov_bulk * phi.bulk**2
        - 0.5 * (kp.conv_bulk @ phi.bulk) * phi.bulk
        + conv_b + pot.smooth(phi.bulk)
    )
    es = mesh.ws @ (
        0.5 * kp.cov_surf * phi.surf**2
        - 0.5 * (kp.conv_surf @ phi.surf) * phi.surf
        + conv_s + pot.smooth(phi.surf)
    )
    return float(eb + es)


def dissipation(mu: BulkSurfaceField, coupling: Coupling, mesh: DiskMesh) -> float:
    """Gradient-flow dissipation rate: the coupled form applied to the potentials."""
    return coupling_form(mu, mu, coupling, mesh)


class Integrator:
    """Holds the assembled operators for one (mesh, kernels, potential, L, dt)."""

    def __init__(self, mesh: DiskMesh, kp: KernelPair, pot, coupling: Coupling,
                 cfg: SchemeConfig):
        self.mesh = mesh
        self.kp = kp
        self.pot = pot
        self.coupling = coupling
        self.cfg = cfg
        self.ys = None
        if cfg.mode == "yosida":
            if not getattr(pot, "singular", False):
                raise ValueError("yosida mode requires the singular potential")
            self.ys = YosidaState(epsilon=cfg.epsilon,
                                  epsilon_star=epsilon_star_bound(pot, kp))

        self._afull = np.concatenate([kp.cov_bulk, kp.cov_surf])
        self._wfull = np.concatenate([mesh.wb, mesh.ws])
        self._tmat = trace_matrix(mesh)
        op = coupled_operator(coupling, mesh)
        if coupling.trace_identified:
            self._a0 = op.tocsr()
        else:
            self._z = (sps.diags(cfg.dt / self._wfull) @ op).tocsr()
        self._eye = None

    # -- pointwise convex slope in the active mode ---------------------------

    def _slope(self, s: np.ndarray) -> np.ndarray:
        if self.ys is not None:
            return yosida_d(s, self.pot, self.ys)
        return self.pot.convex_d(s)

    def _slope_d(self, s: np.ndarray) -> np.ndarray:
        if self.ys is not None:
            return yosida_dd(s, self.pot, self.ys)
        return self.pot.convex_dd(s)

    def _in_domain(self, *arrays) -> bool:
        if self.ys is not None or not getattr(self.pot, "singular", False):
            return True
        cap = 1.0 - self.cfg.safeguard_margin
        return all(np.abs(a).max(initial=0.0) <= cap for a in arrays)

    # -- one implicit step ----------------------------------------------------

    def step(self, state: StepState) -> StepState:
        phin_b, phin_s = state.phi.bulk, state.phi.surf
        q_b = -(self.kp.conv_bulk @ phin_b) + self.pot.smooth_d(phin_b)
        q_s = -(self.kp.conv_surf @ phin_s) + self.pot.smooth_d(phin_s)

        if self.coupling.trace_identified:
            phi_new, mu_new, iters = self._step_identified(state, q_b, q_s)
        else:
            phi_new, mu_new, iters = self._step_robin(state, q_b, q_s)

        new = StepState(t=state.t + self.cfg.dt, phi=phi_new, mu=mu_new)
        new.diag = self._record(new, iters, prev=state.diag)
        return new

    def _newton(self, x0, residual, domain_of, jacobian, t):
        cfg = self.cfg
        x = x0
        fields = domain_of(x)
        if not self._in_domain(*fields):
            raise SolverError("initial Newton iterate outside the phase box", t, [])
        g = residual(x, fields)
        rnorm = float(np.abs(g).max())
        history = [rnorm]
        for it in range(cfg.newton_max_iter):
            if rnorm <= cfg.newton_tol:
                return x, fields, it, history
            lu = splu(jacobian(x, fields).tocsc())
            dx = lu.solve(-g)
            alpha = 1.0
            while True:
                xt = x + alpha * dx
                ft = domain_of(xt)
                if self._in_domain(*ft):
                    gt = residual(xt, ft)
                    rt = float(np.abs(gt).max())
                    if rt < rnorm or rt <= cfg.newton_tol:
                        break
                alpha *= 0.5
                if alpha < 1e-12:
                    raise SolverError("Newton line search stalled (dt too large?)",
                                      t, history)
            x, fields, g, rnorm = xt, ft, gt, rt
            history.append(rnorm)
        raise SolverError("Newton did not converge", t, history)

    def _step_robin(self, state, q_b, q_s):
        mesh, cfg = self.mesh, self.cfg
        nb = mesh.n_bulk
        phin = np.concatenate([state.phi.bulk, state.phi.surf])
        qfull = np.concatenate([q_b, q_s])
        a = self._afull

        def phi_of(m):
            return (phin - self._z @ m,)

        def residual(m, fields):
            (phi,) = fields
            return m - (a * phi + self._slope(phi) + qfull)

        def jacobian(m, fields):
            (phi,) = fields
            d = a + self._slope_d(phi)
            return sps.eye(phin.size, format="csr") + self._z.multiply(d[:, None])

        m0 = a * phin + self._slope(phin) + qfull
        if not self._in_domain(*phi_of(m0)):
            m0 = np.full(phin.size, float(np.mean(m0)))
        m, fields, iters, _ = self._newton(m0, residual, phi_of, jacobian, state.t)
        phi = fields[0]
        phi_new = BulkSurfaceField(phi[:nb].copy(), phi[nb:].copy())
        mu_new = BulkSurfaceField(m[:nb].copy(), m[nb:].copy())
        return phi_new, mu_new, iters

    def _step_identified(self, state, q_b, q_s):
        """L = 0: unknowns are the surface phase and the shared potential."""
        mesh, cfg = self.mesh, self.cfg
        nb, ns = mesh.n_bulk, mesh.n_surf
        bidx = mesh.boundary
        wb, ws = mesh.wb, mesh.ws
        phin_b, phin_s = state.phi.bulk, state.phi.surf
        ab, asf = self.kp.cov_bulk, self.kp.cov_surf

        def fields_of(x):
            psi, mu = x[:ns], x[ns:]
            phi = phin_b - (cfg.dt / wb) * (self._a0 @ mu)
            phi[bidx] -= (ws / wb[bidx]) * (psi - phin_s)
            return phi, psi

        def residual(x, fields):
            phi, psi = fields
            mu = x[ns:]
            g_s = mu[bidx] - (asf * psi + self._slope(psi) + q_s)
            g_b = mu - (ab * phi + self._slope(phi) + q_b)
            return np.concatenate([g_s, g_b])

        def jacobian(x, fields):
            phi, psi = fields
            db = ab + self._slope_d(phi)
            ds = asf + self._slope_d(psi)
            j_ss = sps.diags(-ds)
            j_sm = self._tmat
            # bulk residual: mu - value(phi(psi, mu))
            j_bs = sps.coo_matrix(
                (db[bidx] * ws / wb[bidx], (bidx, np.arange(ns))), shape=(nb, ns)
            )
            j_bm = sps.eye(nb, format="csr") + sps.diags(cfg.dt * db / wb) @ self._a0
            return sps.bmat([[j_ss, j_sm], [j_bs, j_bm]], format="csr")

        mu0 = ab * phin_b + self._slope(phin_b) + q_b
        x0 = np.concatenate([phin_s, mu0])
        if not self._in_domain(*fields_of(x0)):
            x0 = np.concatenate([phin_s, np.full(nb, float(np.mean(mu0)))])
        x, fields, iters, _ = self._newton(x0, residual, fields_of, jacobian, state.t)
        phi, psi = fields
        mu = x[ns:]
        phi_new = BulkSurfaceField(phi.copy(), psi.copy())
        mu_new = BulkSurfaceField(mu.copy(), mu[bidx].copy())
        return phi_new, mu_new, iters

    # -- diagnostics ----------------------------------------------------------

    def potential_of(self, phi: BulkSurfaceField) -> BulkSurfaceField:
        """Nodewise chemical potential of a state (no transport information)."""
        mb = self.kp.cov_bulk * phi.bulk - self.kp.conv_bulk @ phi.bulk \
            + self._slope(phi.bulk) + self.pot.smooth_d(phi.bulk)
        ms = self.kp.cov_surf * phi.surf - self.kp.conv_surf @ phi.surf \
            + self._slope(phi.surf) + self.pot.smooth_d(phi.surf)
        return BulkSurfaceField(mb, ms)

    def energy_of(self, phi: BulkSurfaceField) -> float:
        return energy(phi, self.kp, self.pot, self.mesh, ys=self.ys)

    def _dissipation(self, mu: BulkSurfaceField) -> float:
        # same value as the gated form; at t=0 the nodewise potential of raw
        # initial data need not satisfy the trace identification yet
        mesh = self.mesh
        out = mu.bulk @ (mesh.stiff_b @ mu.bulk) + mu.surf @ (mesh.stiff_s @ mu.surf)
        if self.coupling.chi > 0.0:
            jump = mu.bulk[mesh.boundary] - mu.surf
            out += self.coupling.chi * (jump @ (mesh.ws * jump))
        return float(out)

    def _record(self, state: StepState, iters: int, prev: DiagRecord | None) -> DiagRecord:
        e = self.energy_of(state.phi)
        d = self._dissipation(state.mu)
        linf = linf_norm(state.phi)
        if prev is None:
            eq = 0.0
            e0_d = e
        else:
            # accumulated identity defect: E(t_n) - E(0) + dt * sum of step-end D
            eq = prev.eq_residual + (e - prev.energy) + self.cfg.dt * d
        return DiagRecord(
            t=state.t,
            mean=generalized_mean(state.phi, self.mesh),
            energy=e,
            dissipation=d,
            sep_gap=1.0 - linf,
            linf_phi=linf,
            newton_iters=iters,
            eq_residual=eq,
        )

    # -- trajectory driver ----------------------------------------------------

    def initial_state(self, phi0: BulkSurfaceField) -> StepState:
        phi = phi0.copy()
        linf = linf_norm(phi)
        if getattr(self.pot, "singular", False) and self.ys is None and linf >= 1.0:
            raise ValueError(
                f"initial data must be strictly separated for the singular slope, |phi|={linf}"
            )
        m = generalized_mean(phi, self.mesh)
        if abs(m) >= 1.0:
            raise ValueError(f"initial generalized mean must lie in (-1, 1), got {m}")
        state = StepState(t=0.0, phi=phi, mu=self.potential_of(phi))
        state.diag = self._record(state, iters=0, prev=None)
        return state

    def run(self, phi0: BulkSurfaceField, snapshot_stride: int = 0,
            snapshot_times=None, keep_fields: bool = False) -> Trajectory:
        """Advance to t_end recording diagnostics each step.

        snapshot_stride k stores every k-th state (plus initial and final);
        snapshot_times stores the states nearest to the given times.
        keep_fields stores every state (used by trajectory-difference
        experiments at desk scale).
        """
        cfg = self.cfg
        n_steps = int(round(cfg.t_end / cfg.dt))
        snap_steps = set()
        if snapshot_times is not None:
            for t in snapshot_times:
                k = int(round(t / cfg.dt))
                if 0 <= k <= n_steps:
                    snap_steps.add(k)
        elif snapshot_stride > 0:
            snap_steps.update(range(0, n_steps + 1, snapshot_stride))
            snap_steps.add(n_steps)
        if keep_fields:
            snap_steps.update(range(0, n_steps + 1))

        traj = Trajectory()
        state = self.initial_state(phi0)
        traj.records.append(state.diag)
        if 0 in snap_steps:
            traj.snapshots.append(Snapshot(state.t, state.phi.copy(), state.mu.copy()))
        for k in range(1, n_steps + 1):
            state = self.step(state)
            traj.records.append(state.diag)
            if k in snap_steps:
                traj.snapshots.append(Snapshot(state.t, state.phi.copy(), state.mu.copy()))
        traj.final = state
        return traj
