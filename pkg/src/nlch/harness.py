"""Run configuration, validation gate, experiment drivers, and output plumbing.

Configs are flat ``key = value`` text (comments with #, unknown keys
rejected).  Every run passes the kernel/potential compatibility gate unless
explicitly skipped.  Experiments write per-run diagnostics CSVs plus a
report.json into the output directory and return a report dict whose
``passed`` flag drives the process exit code.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .evolve import DiagRecord, Integrator, SchemeConfig, Trajectory, energy
from .kernels import KernelPair, KernelSpec, build_kernel_pair, validate_kernels
from .mesh import DiskMesh, build_disk_mesh, dump_mesh
from .potentials import (
    LogPotential,
    epsilon_star_bound,
    validate_potential,
)
from .spaces import (
    BulkSurfaceField,
    Coupling,
    EllipticSolver,
    generalized_mean,
    l2_norm,
    linf_norm,
    project,
)
from .stationary import (
    averaging_identities,
    check_steady_gradient,
    lojasiewicz_fit,
    smoothing_ratio,
    solve_steady,
)


class ConfigError(ValueError):
    pass


class GateError(ValueError):
    pass


def _parse_float_list(s: str) -> tuple:
    return tuple(float(tok) for tok in s.split(",") if tok.strip())


# key -> (kind, default); kinds: int, float, str, floats
SCHEMA = {
    "experiment": ("str", "simulate"),
    "mesh_level": ("int", 2),
    "j_sigma": ("float", 0.35),
    "j_mass": ("float", 2.0),
    "k_sigma": ("float", 0.35),
    "k_mass": ("float", 2.0),
    "theta": ("float", 0.5),
    "theta0": ("float", 1.0),
    "coupling_l": ("float", 1.0),
    "dt": ("float", 1e-3),
    "t_end": ("float", 2.0),
    "mode": ("str", "singular"),
    "epsilon": ("float", 0.02),
    "newton_tol": ("float", 1e-12),
    "newton_max_iter": ("int", 60),
    "safeguard_margin": ("float", 1e-6),
    "ic_kind": ("str", "tanh"),
    "ic_mean": ("float", 0.0),
    "ic_amplitude": ("float", 0.2),
    "ic_plateau": ("float", 0.97),
    "ic_radius": ("float", 0.78),
    "ic_width": ("float", 0.1),
    "delta_init": ("float", 0.05),
    "seed": ("int", 1234),
    "diag_stride": ("int", 1),
    "snapshot_stride": ("int", 0),
    "out_dir": ("str", "out"),
    "l_values": ("floats", (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)),
    "eps_values": ("floats", (4e-2, 2e-2, 1e-2)),
    "perturbation": ("float", 1e-4),
    "equil_tol": ("float", 1e-3),
}

_FIELDS = [
    (key, {"int": int, "float": float, "str": str, "floats": tuple}[kind], default)
    for key, (kind, default) in SCHEMA.items()
]

RunConfig = dataclasses.make_dataclass(
    "RunConfig",
    [(k, t, dataclasses.field(default=d)) for k, t, d in _FIELDS],
    frozen=True,
)
RunConfig.__doc__ = "Resolved run configuration (see SCHEMA for keys and defaults)."


def parse_config_text(text: str) -> "RunConfig":
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        kind = SCHEMA[key][0]
        try:
            if kind == "int":
                values[key] = int(val)
            elif kind == "float":
                values[key] = float(val)
            elif kind == "floats":
                values[key] = _parse_float_list(val)
            else:
                values[key] = val
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {val!r}") from exc
    return RunConfig(**values)


def parse_config(path: str) -> "RunConfig":
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read())


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def config_text(cfg: "RunConfig") -> str:
    """Emit the resolved config; parsing the result reproduces cfg exactly."""
    lines = []
    for key, (kind, _default) in SCHEMA.items():
        v = getattr(cfg, key)
        if kind == "floats":
            lines.append(f"{key} = {','.join(_fmt(x) for x in v)}")
        else:
            lines.append(f"{key} = {_fmt(v) if kind != 'str' else v}")
    return "\n".join(lines) + "\n"


def scheme_of(cfg: "RunConfig", **overrides) -> SchemeConfig:
    kw = dict(
        dt=cfg.dt,
        t_end=cfg.t_end,
        mode=cfg.mode,
        epsilon=cfg.epsilon,
        newton_tol=cfg.newton_tol,
        newton_max_iter=cfg.newton_max_iter,
        safeguard_margin=cfg.safeguard_margin,
    )
    kw.update(overrides)
    return SchemeConfig(**kw)


@dataclass
class Setup:
    cfg: "RunConfig"
    mesh: DiskMesh
    kp: KernelPair
    pot: LogPotential
    coupling: Coupling


def build_setup(cfg: "RunConfig", skip_validation: bool = False) -> Setup:
    """Build geometry/kernels/potential and run the compatibility gate."""
    mesh = build_disk_mesh(cfg.mesh_level)
    kp = build_kernel_pair(
        KernelSpec(sigma=cfg.j_sigma, mass=cfg.j_mass),
        KernelSpec(sigma=cfg.k_sigma, mass=cfg.k_mass),
        mesh,
    )
    pot = LogPotential(theta=cfg.theta, theta0=cfg.theta0)
    if not skip_validation:
        failures = list(validate_kernels(kp).failures)
        failures += list(validate_potential(pot, kp).failures)
        if cfg.mode == "yosida":
            ceiling = epsilon_star_bound(pot, kp)
            if not (0.0 < cfg.epsilon < ceiling):
                failures.append(
                    f"yosida_parameter: epsilon {cfg.epsilon:.6g} outside (0, {ceiling:.6g})"
                )
        if failures:
            raise GateError("; ".join(failures))
    return Setup(cfg=cfg, mesh=mesh, kp=kp, pot=pot, coupling=Coupling(cfg.coupling_l))


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

def _smoothed_noise(mesh: DiskMesh, rng: np.random.Generator) -> BulkSurfaceField:
    ub = rng.uniform(-1.0, 1.0, mesh.n_bulk)
    us = rng.uniform(-1.0, 1.0, mesh.n_surf)
    # one mass application (scaled back by the lumped weights) keeps the
    # perturbation nodewise random but mesh-resolved
    return BulkSurfaceField((mesh.mass_b @ ub) / mesh.wb, (mesh.mass_s @ us) / mesh.ws)


def make_initial(cfg: "RunConfig", mesh: DiskMesh, seed: int | None = None) -> BulkSurfaceField:
    """Built-in generators: constant, random, tanh (radial cap), bubbles."""
    cap = 1.0 - cfg.delta_init
    kind = cfg.ic_kind
    if kind == "constant":
        v = float(np.clip(cfg.ic_mean, -cap, cap))
        return BulkSurfaceField.constant(v, mesh)
    if kind == "random":
        rng = np.random.default_rng(cfg.seed if seed is None else seed)
        noise = _smoothed_noise(mesh, rng)
        f = BulkSurfaceField(
            cfg.ic_mean + cfg.ic_amplitude * noise.bulk,
            cfg.ic_mean + cfg.ic_amplitude * noise.surf,
        )
        f = BulkSurfaceField(*(comp - (generalized_mean(f, mesh) - cfg.ic_mean)
                               for comp in (f.bulk, f.surf)))
        return BulkSurfaceField(np.clip(f.bulk, -cap, cap), np.clip(f.surf, -cap, cap))
    if kind == "tanh":
        d = np.hypot(mesh.nodes[:, 0], mesh.nodes[:, 1])
        a = min(cfg.ic_plateau, cap)
        fb = a * np.tanh((cfg.ic_radius - d) / cfg.ic_width)
        fs = np.full(mesh.n_surf, a * np.tanh((cfg.ic_radius - 1.0) / cfg.ic_width))
        return BulkSurfaceField(fb, fs)
    if kind == "bubbles":
        a = min(cfg.ic_plateau, cap)

        def blob(p, c, r):
            d = np.hypot(p[:, 0] - c[0], p[:, 1] - c[1])
            return 0.5 * (1.0 + np.tanh((r - d) / cfg.ic_width))

        xy = mesh.nodes
        bxy = xy[mesh.boundary]
        c1, r1 = (-0.35, 0.12), 0.45
        c2, r2 = (0.62, -0.18), 0.40
        fb = a * np.clip(-1.0 + 2.0 * (blob(xy, c1, r1) + blob(xy, c2, r2)), -1.0, 1.0)
        fs = a * np.clip(-1.0 + 2.0 * (blob(bxy, c1, r1) + blob(bxy, c2, r2)), -1.0, 1.0)
        return BulkSurfaceField(fb, fs)
    raise ConfigError(f"unknown ic_kind {kind!r}")


# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------

def diagnostics_lines(records) -> list:
    lines = [",".join(DiagRecord.COLUMNS)]
    for r in records:
        lines.append(",".join(_fmt(v) for v in r.row()))
    return lines


def write_diagnostics(records, path: str, stride: int = 1) -> None:
    kept = [r for i, r in enumerate(records) if i % max(stride, 1) == 0 or i == len(records) - 1]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(diagnostics_lines(kept)) + "\n")


def write_snapshot(path: str, t: float, mesh: DiskMesh, phi: BulkSurfaceField,
                   mu: BulkSurfaceField, steady: bool = False) -> None:
    """Flat-text state dump: header, bulk lines (x y phi mu), surface lines
    (angle psi theta)."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{_fmt(t)} {mesh.n_bulk} {mesh.n_surf} steady={'true' if steady else 'false'}\n")
        for i in range(mesh.n_bulk):
            f.write(f"{_fmt(mesh.nodes[i, 0])} {_fmt(mesh.nodes[i, 1])} "
                    f"{_fmt(phi.bulk[i])} {_fmt(mu.bulk[i])}\n")
        for j in range(mesh.n_surf):
            f.write(f"{_fmt(mesh.boundary_angles[j])} {_fmt(phi.surf[j])} "
                    f"{_fmt(mu.surf[j])}\n")


def write_report(report: dict, out_dir: str) -> None:
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True, default=float)
        f.write("\n")


def _ensure_out(out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def fit_energy_decay(ts: np.ndarray, es: np.ndarray):
    """Fit A exp(-omega t) + B on the transient window (30%..95% of the drop).

    Returns (omega, plateau, r2) or None when the decay is degenerate
    (already at the plateau).
    """
    e0, e_end = float(es[0]), float(es[-1])
    drop = e0 - e_end
    if drop <= 1e-12 * max(1.0, abs(e0)):
        return None
    i0 = int(np.argmax(es <= e0 - 0.3 * drop))
    i1 = int(np.argmax(es <= e_end + 0.05 * drop))
    if i1 <= i0 + 4:
        i1 = min(len(es) - 1, i0 + 5)
    tw, ew = ts[i0:i1 + 1], es[i0:i1 + 1]

    def model(t, amp, om, b):
        return amp * np.exp(-om * t) + b

    t_half = float(ts[int(np.argmax(es <= e0 - 0.5 * drop))])
    p0 = (drop, 1.0 / max(t_half, 1e-3), e_end)
    bounds = ([1e-14, 1e-3, e_end - 0.2 * drop], [np.inf, 1e3, e0])
    popt, _ = curve_fit(model, tw, ew, p0=p0, bounds=bounds, maxfev=40000)
    resid = ew - model(tw, *popt)
    denom = float(np.sum((ew - ew.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / denom if denom > 0 else 1.0
    return float(popt[1]), float(popt[2]), r2


def exp_dissipative(cfg: "RunConfig", out_dir: str, skip_validation: bool = False) -> dict:
    """Exponential decay of the energy and IC-independence of the plateau."""
    setup = build_setup(cfg, skip_validation)
    out_dir = _ensure_out(out_dir)
    scheme = scheme_of(cfg)
    results = []
    for idx, seed in enumerate((cfg.seed, cfg.seed + 1)):
        phi0 = make_initial(cfg, setup.mesh, seed=seed)
        integ = Integrator(setup.mesh, setup.kp, setup.pot, setup.coupling, scheme)
        traj = integ.run(phi0)
        write_diagnostics(traj.records, os.path.join(out_dir, f"dissipative_run{idx}.csv"),
                          stride=cfg.diag_stride)
        ts = np.array([r.t for r in traj.records])
        es = np.array([r.energy for r in traj.records])
        fit = fit_energy_decay(ts, es)
        results.append({
            "seed": seed,
            "mean": traj.records[0].mean,
            "e0": float(es[0]),
            "e_end": float(es[-1]),
            "fit": None if fit is None else
            {"omega": fit[0], "plateau": fit[1], "r2": fit[2]},
        })
    report = {"experiment": "dissipative", "runs": results}
    fits = [r["fit"] for r in results]
    if any(f is None for f in fits):
        report["degenerate"] = True
        report["passed"] = all(f is None for f in fits)
    else:
        plateaus = [f["plateau"] for f in fits]
        gap = abs(plateaus[0] - plateaus[1]) / max(abs(plateaus[0]), abs(plateaus[1]), 1e-30)
        report["plateau_rel_gap"] = gap
        report["passed"] = bool(
            all(f["omega"] > 0.0 and f["r2"] >= 0.9 for f in fits)
            and all(f["plateau"] <= r["e0"] for f, r in zip(fits, results))
            and gap <= 0.05
        )
    write_report(report, out_dir)
    return report


def exp_l_limit(cfg: "RunConfig", out_dir: str, skip_validation: bool = False) -> dict:
    """Trajectory convergence rates as the kinetic coefficient goes to 0."""
    l_values = tuple(cfg.l_values)
    if len(l_values) < 3 or any(l <= 0 for l in l_values):
        raise ConfigError("l_values must hold >= 3 positive coefficients")
    if any(b >= a for a, b in zip(l_values, l_values[1:])):
        raise ConfigError("l_values must be strictly decreasing")
    setup = build_setup(cfg, skip_validation)
    out_dir = _ensure_out(out_dir)
    scheme = scheme_of(cfg)
    phi0 = make_initial(cfg, setup.mesh)

    ref = Integrator(setup.mesh, setup.kp, setup.pot, Coupling(0.0), scheme).run(
        phi0, keep_fields=True)
    write_diagnostics(ref.records, os.path.join(out_dir, "l_limit_ref.csv"),
                      stride=cfg.diag_stride)
    ref_fields = [s.phi for s in ref.snapshots]
    n1 = int(round(1.0 / cfg.dt))

    e_vals, f_vals = [], []
    for lv in l_values:
        traj = Integrator(setup.mesh, setup.kp, setup.pot, Coupling(lv), scheme).run(
            phi0, keep_fields=True)
        diffs = np.array([l2_norm(s.phi - r, setup.mesh)
                          for s, r in zip(traj.snapshots, ref_fields)])
        e_vals.append(float(np.sqrt(cfg.dt * np.sum(diffs**2))))
        f_vals.append(float(diffs[min(n1, len(diffs) - 1):].max()))

    ls = np.asarray(l_values)
    e_arr, f_arr = np.asarray(e_vals), np.asarray(f_vals)
    slope_e = float(np.polyfit(np.log(ls), np.log(e_arr), 1)[0])
    slope_f = float(np.polyfit(np.log(ls), np.log(f_arr), 1)[0])
    mono_e = bool(np.all(np.diff(e_arr) < 0.0))
    mono_f = bool(np.all(np.diff(f_arr) < 0.0))

    with open(os.path.join(out_dir, "l_limit_rates.csv"), "w", encoding="utf-8") as f:
        f.write("L,err_l2_time,err_sup_after_1\n")
        for lv, ev, fv in zip(l_values, e_vals, f_vals):
            f.write(f"{_fmt(lv)},{_fmt(ev)},{_fmt(fv)}\n")

    report = {
        "experiment": "l-limit",
        "l_values": list(l_values),
        "err_l2_time": e_vals,
        "err_sup_after_1": f_vals,
        "slope_l2_time": slope_e,
        "slope_sup": slope_f,
        "monotone_l2_time": mono_e,
        "monotone_sup": mono_f,
        "passed": bool(0.4 <= slope_e <= 1.2 and slope_f >= 0.2 and mono_e and mono_f),
    }
    write_report(report, out_dir)
    return report


def exp_continuous_dependence(cfg: "RunConfig", out_dir: str,
                              skip_validation: bool = False) -> dict:
    """Gronwall stability, the contraction bound, and time Hoelder ratios."""
    if cfg.t_end < 1.5:
        raise ConfigError("continuous-dependence runs need t_end >= 1.5")
    if cfg.dt > 2.0e-3:
        raise ConfigError("continuous-dependence runs need dt <= 2e-3 to resolve dyadic pairs")
    setup = build_setup(cfg, skip_validation)
    out_dir = _ensure_out(out_dir)
    mesh = setup.mesh
    scheme = scheme_of(cfg)
    solver = EllipticSolver(mesh, setup.coupling)

    phi0 = make_initial(cfg, mesh)
    rng = np.random.default_rng(cfg.seed + 7)
    noise = _smoothed_noise(mesh, rng)
    pert = project(noise, mesh)
    scale = cfg.perturbation / max(linf_norm(pert), 1e-30)
    phi0b = phi0 + scale * pert
    if linf_norm(phi0b) >= 1.0:
        raise ConfigError("perturbed initial state leaves the phase box; lower perturbation")
    dm = abs(generalized_mean(phi0, mesh) - generalized_mean(phi0b, mesh))
    if dm > 1e-12:
        raise ConfigError(f"perturbation must preserve the generalized mean (defect {dm:.2e})")

    integ = Integrator(mesh, setup.kp, setup.pot, setup.coupling, scheme)
    tr_a = integ.run(phi0, keep_fields=True)
    tr_b = integ.run(phi0b, keep_fields=True)
    tr_a2 = integ.run(phi0, keep_fields=True)  # determinism: identical inputs

    zero_gap = max(
        float(np.abs(sa.phi.bulk - sb.phi.bulk).max(initial=0.0))
        for sa, sb in zip(tr_a.snapshots, tr_a2.snapshots)
    )

    dt = cfg.dt
    duals, l2s = [], []
    for sa, sb in zip(tr_a.snapshots, tr_b.snapshots):
        d = sa.phi - sb.phi
        duals.append(solver.dual_norm0(project(d, mesh)))
        l2s.append(l2_norm(d, mesh))
    duals = np.asarray(duals)
    l2s = np.asarray(l2s)
    cum = np.concatenate([[0.0], np.cumsum(l2s[1:] ** 2) * dt])
    d0sq = duals[0] ** 2
    gronwall_c = float(np.max((duals**2 + cum) / d0sq))

    alpha = setup.pot.convexity_floor
    c_star = min(setup.kp.a_min_bulk + alpha - setup.pot.smooth_lipschitz,
                 setup.kp.a_min_surf + alpha - setup.pot.smooth_lipschitz)
    ts = np.array([s.t for s in tr_a.snapshots])
    dual_sq = duals**2
    cum_dual = np.concatenate([[0.0], np.cumsum(dual_sq[1:]) * dt])
    decay = dual_sq - np.exp(-c_star * ts) * d0sq
    with np.errstate(divide="ignore", invalid="ignore"):
        m4_curve = np.where(cum_dual > 0.0, decay / cum_dual, 0.0)
    m4 = float(np.max(m4_curve))

    # Hoelder ratios on the base trajectory at dyadic pairs past t = 1
    snap_at = {}
    for s in tr_a.snapshots:
        snap_at[int(round(s.t / dt))] = s
    k_base = int(round(1.0 / dt))
    ratios = []
    for k in range(1, 9):
        step = int(round(2.0 ** (-k) / dt))
        if step < 1:
            break
        s1, s2 = snap_at[k_base], snap_at[k_base + step]
        delta_t = s2.t - s1.t
        dn = solver.dual_norm0(project(s2.phi - s1.phi, mesh))
        ratios.append(dn / np.sqrt(delta_t))
    ratios = np.asarray(ratios)
    holder_spread = float(ratios.max() / ratios.min()) if ratios.size else np.inf

    write_diagnostics(tr_a.records, os.path.join(out_dir, "cont_dep_base.csv"),
                      stride=cfg.diag_stride)
    write_diagnostics(tr_b.records, os.path.join(out_dir, "cont_dep_perturbed.csv"),
                      stride=cfg.diag_stride)
    report = {
        "experiment": "cont-dep",
        "identical_max_gap": zero_gap,
        "gronwall_constant": gronwall_c,
        "c_star": c_star,
        "m4": m4,
        "holder_ratios": [float(r) for r in ratios],
        "holder_spread": holder_spread,
        "initial_dual": float(duals[0]),
        "final_dual": float(duals[-1]),
        "passed": bool(
            zero_gap == 0.0
            and np.isfinite(gronwall_c)
            and c_star > 0.0
            and np.isfinite(m4)
            and holder_spread <= 10.0
        ),
    }
    write_report(report, out_dir)
    return report


def exp_equilibrium(cfg: "RunConfig", out_dir: str, skip_validation: bool = False) -> dict:
    """Long run, steady solve from the terminal state, and tail diagnostics."""
    setup = build_setup(cfg, skip_validation)
    out_dir = _ensure_out(out_dir)
    mesh = setup.mesh
    scheme = scheme_of(cfg)
    phi0 = make_initial(cfg, mesh)
    integ = Integrator(mesh, setup.kp, setup.pot, setup.coupling, scheme)
    stride = max(1, int(round(0.25 / cfg.dt)))
    traj = integ.run(phi0, snapshot_stride=stride)
    write_diagnostics(traj.records, os.path.join(out_dir, "equilibrium.csv"),
                      stride=cfg.diag_stride)

    mass = generalized_mean(phi0, mesh)
    ss = solve_steady(mass, traj.final.phi, setup.kp, setup.pot, mesh)
    write_snapshot(os.path.join(out_dir, "steady_state.txt"), traj.final.t, mesh,
                   ss.phi_inf, BulkSurfaceField.constant(ss.mu_inf, mesh), steady=True)

    terminal_dist = linf_norm(traj.final.phi - ss.phi_inf)
    tail = [s for s in traj.snapshots if s.t >= traj.final.t / 2.0]
    dists = [linf_norm(s.phi - ss.phi_inf) for s in tail]
    run_min = np.minimum.accumulate(dists)
    tail_monotone = bool(np.all(np.asarray(dists) <= np.maximum(run_min * 1.10, 1e-13)))
    mass_gap = abs(generalized_mean(ss.phi_inf, mesh) - mass)

    fixed_state = integ.initial_state(ss.phi_inf)
    moved = linf_norm(integ.step(fixed_state).phi - ss.phi_inf)

    ls = lojasiewicz_fit(traj, ss, setup.kp, setup.pot, mesh)
    sm = smoothing_ratio(traj, ss, tau=1.0, mesh=mesh)

    converged = terminal_dist <= cfg.equil_tol
    report = {
        "experiment": "equilibrium",
        "terminal_linf_distance": terminal_dist,
        "converged": bool(converged),
        "status": "converged" if converged else "inconclusive",
        "tail_monotone": tail_monotone,
        "steady_residual": ss.residual,
        "steady_mu": ss.mu_inf,
        "steady_sep_gap": ss.sep_gap,
        "mass_gap": mass_gap,
        "fixed_point_movement": moved,
        "lojasiewicz": dataclasses.asdict(ls),
        "smoothing": {
            "at_steady_state": sm.at_steady_state,
            "ratio": None if sm.at_steady_state else sm.ratio,
            "sup_linf": sm.sup_linf,
            "sup_l2": sm.sup_l2,
        },
        "passed": bool(
            ss.residual <= 1e-10
            and mass_gap <= 1e-11
            and moved <= 10.0 * cfg.newton_tol
            and (converged or not tail_monotone)  # non-convergence is inconclusive, not failure
        ),
    }
    write_report(report, out_dir)
    return report


def exp_yosida_sweep(cfg: "RunConfig", out_dir: str, skip_validation: bool = False) -> dict:
    """Distance between the singular flow and its regularizations at t_end."""
    eps_values = tuple(cfg.eps_values)
    if len(eps_values) < 2 or any(b >= a for a, b in zip(eps_values, eps_values[1:])):
        raise ConfigError("eps_values must be strictly decreasing with >= 2 entries")
    setup = build_setup(cfg, skip_validation)
    out_dir = _ensure_out(out_dir)
    scheme = scheme_of(cfg, mode="singular")
    phi0 = make_initial(cfg, setup.mesh)
    ref = Integrator(setup.mesh, setup.kp, setup.pot, setup.coupling, scheme).run(phi0)
    ceiling = epsilon_star_bound(setup.pot, setup.kp)
    dists = []
    for eps in eps_values:
        if not 0.0 < eps < ceiling:
            raise GateError(f"yosida_parameter: epsilon {eps:.6g} outside (0, {ceiling:.6g})")
        sch = scheme_of(cfg, mode="yosida", epsilon=eps)
        traj = Integrator(setup.mesh, setup.kp, setup.pot, setup.coupling, sch).run(phi0)
        dists.append(l2_norm(traj.final.phi - ref.final.phi, setup.mesh))
    monotone = bool(np.all(np.diff(dists) < 0.0))
    report = {
        "experiment": "yosida-sweep",
        "eps_values": list(eps_values),
        "epsilon_star": ceiling,
        "l2_distances": dists,
        "monotone": monotone,
        "passed": monotone,
    }
    write_report(report, out_dir)
    return report


def run_simulate(cfg: "RunConfig", out_dir: str, skip_validation: bool = False,
                 dump_mesh_path: str | None = None) -> dict:
    setup = build_setup(cfg, skip_validation)
    out_dir = _ensure_out(out_dir)
    if dump_mesh_path:
        dump_mesh(setup.mesh, dump_mesh_path)
    phi0 = make_initial(cfg, setup.mesh)
    integ = Integrator(setup.mesh, setup.kp, setup.pot, setup.coupling, scheme_of(cfg))
    traj = integ.run(phi0, snapshot_stride=cfg.snapshot_stride)
    write_diagnostics(traj.records, os.path.join(out_dir, "diagnostics.csv"),
                      stride=cfg.diag_stride)
    for i, snap in enumerate(traj.snapshots):
        write_snapshot(os.path.join(out_dir, f"snapshot_{i:04d}.txt"),
                       snap.t, setup.mesh, snap.phi, snap.mu)
    with open(os.path.join(out_dir, "resolved_config.txt"), "w", encoding="utf-8") as f:
        f.write(config_text(cfg))
    r = traj.records
    report = {
        "experiment": "simulate",
        "steps": len(r) - 1,
        "mean_drift": float(max(abs(rec.mean - r[0].mean) for rec in r)),
        "max_energy_increase": float(max(
            (r[i + 1].energy - r[i].energy for i in range(len(r) - 1)), default=0.0)),
        "final_energy": r[-1].energy,
        "final_sep_gap": r[-1].sep_gap,
        "passed": True,
    }
    write_report(report, out_dir)
    return report


def run_steady(cfg: "RunConfig", out_dir: str, skip_validation: bool = False) -> dict:
    """Continuation steady solve: evolve to t_end, then Newton."""
    setup = build_setup(cfg, skip_validation)
    out_dir = _ensure_out(out_dir)
    phi0 = make_initial(cfg, setup.mesh)
    integ = Integrator(setup.mesh, setup.kp, setup.pot, setup.coupling, scheme_of(cfg))
    traj = integ.run(phi0)
    mass = generalized_mean(phi0, setup.mesh)
    ss = solve_steady(mass, traj.final.phi, setup.kp, setup.pot, setup.mesh)
    write_snapshot(os.path.join(out_dir, "steady_state.txt"), traj.final.t, setup.mesh,
                   ss.phi_inf, BulkSurfaceField.constant(ss.mu_inf, setup.mesh), steady=True)
    bulk_defect, surf_defect = averaging_identities(ss, setup.kp, setup.pot, setup.mesh)
    grad = check_steady_gradient(ss, setup.kp, setup.pot, setup.mesh)
    report = {
        "experiment": "steady",
        "residual": ss.residual,
        "mu_inf": ss.mu_inf,
        "sep_gap": ss.sep_gap,
        "mass_gap": abs(generalized_mean(ss.phi_inf, setup.mesh) - mass),
        "averaging_defect_bulk": bulk_defect,
        "averaging_defect_surf": surf_defect,
        "gradient_check": dataclasses.asdict(grad),
        "passed": bool(ss.residual <= 1e-10 and max(bulk_defect, surf_defect) <= 1e-8
                       and ss.sep_gap > 0.0 and grad.passed),
    }
    write_report(report, out_dir)
    return report


def run_validate(cfg: "RunConfig") -> dict:
    """Gate-only invocation; reports all constants and clause outcomes."""
    mesh = build_disk_mesh(cfg.mesh_level)
    kp = build_kernel_pair(
        KernelSpec(sigma=cfg.j_sigma, mass=cfg.j_mass),
        KernelSpec(sigma=cfg.k_sigma, mass=cfg.k_mass),
        mesh,
    )
    pot = LogPotential(theta=cfg.theta, theta0=cfg.theta0)
    kr = validate_kernels(kp)
    pr = validate_potential(pot, kp)
    failures = list(kr.failures) + list(pr.failures)
    eps_ceiling = epsilon_star_bound(pot, kp)
    if cfg.mode == "yosida" and not (0.0 < cfg.epsilon < eps_ceiling):
        failures.append(
            f"yosida_parameter: epsilon {cfg.epsilon:.6g} outside (0, {eps_ceiling:.6g})"
        )
    alpha = pot.convexity_floor
    c_star = min(kp.a_min_bulk + alpha - pot.smooth_lipschitz,
                 kp.a_min_surf + alpha - pot.smooth_lipschitz)
    return {
        "experiment": "validate",
        "kernel_constants": kr.constants,
        "j_w11": kp.j_w11,
        "epsilon_star": eps_ceiling,
        "c_star": c_star,
        "potential_checks": pr.checks,
        "failures": failures,
        "passed": not failures,
    }
