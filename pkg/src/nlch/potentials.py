"""Singular logarithmic potential, its Yosida regularization, and validators.

The double-well splits into a convex singular part (the mixing entropy,
slope ``beta``) and a smooth concave quench part.  Bulk and boundary share
the same convex part, which is what the separation and equilibrium results
require.  A regular quartic well ships only for solver smoke tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .kernels import KernelPair


class SeparationError(ValueError):
    """Raised when a singular-potential evaluation leaves (-1, 1)."""

    def __init__(self, worst: float):
        self.worst = float(worst)
        super().__init__(f"phase value {self.worst!r} outside the open interval (-1, 1)")


def _check_open_interval(s):
    worst = float(np.max(np.abs(s))) if np.size(s) else 0.0
    if worst >= 1.0:
        raise SeparationError(worst)


@dataclass(frozen=True)
class LogPotential:
    """Logarithmic double-well with temperature `theta` < critical `theta0`.

    convex(s)      = theta/2 [(1+s)ln(1+s) + (1-s)ln(1-s)]   on [-1, 1]
    convex_d(s)    = theta/2 ln((1+s)/(1-s))                  on (-1, 1)
    smooth(s)      = -theta0 s^2 / 2
    The convex slope floor is `theta`; the smooth part has Lipschitz
    derivative with constant `theta0`.
    """

    theta: float
    theta0: float
    singular: bool = True

    def __post_init__(self):
        if self.theta <= 0.0 or self.theta0 <= 0.0:
            raise ValueError("temperatures must be positive")

    @property
    def convexity_floor(self) -> float:
        return self.theta

    @property
    def smooth_lipschitz(self) -> float:
        return self.theta0

    def convex(self, s):
        if np.size(s) and float(np.max(np.abs(s))) > 1.0:
            raise SeparationError(float(np.max(np.abs(s))))
        return _accel.log_convex(s, self.theta)

    def convex_d(self, s):
        _check_open_interval(s)
        return _accel.log_slope(s, self.theta)

    def convex_dd(self, s):
        _check_open_interval(s)
        return _accel.log_curvature(s, self.theta)

    def smooth(self, s):
        s = np.asarray(s, dtype=np.float64) if np.ndim(s) else s
        return -0.5 * self.theta0 * s * s

    def smooth_d(self, s):
        s = np.asarray(s, dtype=np.float64) if np.ndim(s) else s
        return -self.theta0 * s

    def smooth_dd(self, s):
        return -self.theta0 * np.ones_like(np.asarray(s, dtype=np.float64)) if np.ndim(s) else -self.theta0


@dataclass(frozen=True)
class QuarticPotential:
    """Regular double-well (s^2-1)^2/4, split convex/concave. Smoke tests only."""

    singular: bool = False
    theta: float = 0.0
    theta0: float = 1.0

    @property
    def convexity_floor(self) -> float:
        return 0.0

    @property
    def smooth_lipschitz(self) -> float:
        return 1.0

    def convex(self, s):
        s = np.asarray(s, dtype=np.float64)
        return 0.25 * (s**4 + 1.0)

    def convex_d(self, s):
        s = np.asarray(s, dtype=np.float64)
        return s**3

    def convex_dd(self, s):
        s = np.asarray(s, dtype=np.float64)
        return 3.0 * s**2

    def smooth(self, s):
        s = np.asarray(s, dtype=np.float64)
        return -0.5 * s * s

    def smooth_d(self, s):
        return -np.asarray(s, dtype=np.float64)

    def smooth_dd(self, s):
        return -np.ones_like(np.asarray(s, dtype=np.float64))


def epsilon_star_bound(pot: LogPotential, kp: KernelPair) -> float:
    """Admissible ceiling for the Yosida parameter.

    Uses the sup of the domain-restricted kernel masses (the computable
    stand-in for the L1 norms over the domain and the boundary).
    """
    g = pot.smooth_lipschitz
    return min(
        1.0 / (2.0 * kp.a_max_bulk + 2.0 * g + 1.0),
        1.0 / (2.0 * kp.a_max_surf + 2.0 * g + 1.0),
    )


@dataclass(frozen=True)
class YosidaState:
    """Moreau-Yosida regularization state for the logarithmic slope.

    The resolvent R(s) solves R + eps*beta(R) = s; the regularized slope is
    beta_eps(s) = (s - R(s))/eps, defined for every real s.
    """

    epsilon: float
    epsilon_star: float
    tol: float = 1e-14
    max_iter: int = 200

    def __post_init__(self):
        if not (0.0 < self.epsilon < self.epsilon_star):
            raise ValueError(
                f"epsilon must lie in (0, {self.epsilon_star!r}), got {self.epsilon!r}"
            )


def yosida_resolvent(s, pot: LogPotential, ys: YosidaState):
    """R(s) in (-1, 1) for any real s."""
    return _accel.resolvent(s, pot.theta, ys.epsilon, ys.tol, ys.max_iter)


def yosida_d(s, pot: LogPotential, ys: YosidaState):
    """Regularized slope beta_eps(s) = (s - R(s))/eps."""
    r = yosida_resolvent(s, pot, ys)
    return (np.asarray(s, dtype=np.float64) - r) / ys.epsilon if np.ndim(s) else (s - r) / ys.epsilon


def yosida_dd(s, pot: LogPotential, ys: YosidaState):
    """Derivative of the regularized slope: beta'(R)/(1 + eps*beta'(R))."""
    r = yosida_resolvent(s, pot, ys)
    bp = _accel.log_curvature(r, pot.theta)
    return bp / (1.0 + ys.epsilon * bp)


def yosida_convex(s, pot: LogPotential, ys: YosidaState):
    """Moreau envelope of the convex part: convex(R) + eps/2 * beta_eps(s)^2."""
    r = yosida_resolvent(s, pot, ys)
    slope = (np.asarray(s, dtype=np.float64) - r) / ys.epsilon
    return _accel.log_convex(r, pot.theta) + 0.5 * ys.epsilon * slope * slope


@dataclass(frozen=True)
class PotentialReport:
    """Clause-by-clause compatibility check of potential vs kernels."""

    checks: dict = field(repr=False)
    passed: bool = False
    failures: tuple = ()


def validate_potential(pot: LogPotential, kp: KernelPair) -> PotentialReport:
    """Check the slope-compatibility and wall-behavior clauses.

    Each clause gets a pass flag; failures carry a human-readable message
    citing the violated inequality with the mesh-computed constants.
    """
    checks = {}
    failures = []
    alpha = pot.convexity_floor
    margin = alpha / (1.0 + alpha)

    for side, amin in (("bulk", kp.a_min_bulk), ("surface", kp.a_min_surf)):
        bound = amin + margin
        ok = 0.0 < pot.smooth_lipschitz < bound
        checks[f"smooth_slope_compat_{side}"] = {
            "lipschitz": pot.smooth_lipschitz,
            "bound": bound,
            "passed": ok,
        }
        if not ok:
            failures.append(
                f"smooth_slope_compat ({side}): lipschitz {pot.smooth_lipschitz:.6g} >= "
                f"{bound:.6g} = min kernel coverage + convexity margin"
            )

    # wall log-rate: 1/beta(1-2d) should decay like 1/|ln d|^kappa, kappa > 1/2 in 2D
    deltas = np.logspace(-6, -2, 9)
    inv_beta = 1.0 / np.asarray(pot.convex_d(1.0 - 2.0 * deltas))
    slope_fit = np.polyfit(np.log(1.0 / np.abs(np.log(deltas))), np.log(inv_beta), 1)[0]
    ok = slope_fit >= 0.5
    checks["wall_log_rate"] = {"fitted_exponent": float(slope_fit), "passed": ok}
    if not ok:
        failures.append(
            f"wall_log_rate: fitted |ln|-exponent {slope_fit:.3f} < 0.5"
        )

    # wall slope bound: 1/beta'(1-2d) <= C0*d with C0 = max(1, 4/theta) (exact for log)
    c0 = max(1.0, 4.0 / pot.theta)
    ratios = 1.0 / (np.asarray(pot.convex_dd(1.0 - 2.0 * deltas)) * deltas)
    ok = bool(np.all(ratios <= c0 * (1.0 + 1e-12)))
    checks["wall_slope_bound"] = {"constant": c0, "max_ratio": float(ratios.max()), "passed": ok}
    if not ok:
        failures.append(
            f"wall_slope_bound: 1/beta'(1-2d) exceeds {c0:.3g}*d (max ratio {ratios.max():.3g})"
        )

    # wall monotonicity of beta' near +1 / -1
    grid = 1.0 - np.logspace(-8, -0.31, 64)[::-1]
    bp = np.asarray(pot.convex_dd(grid))
    ok = bool(np.all(np.diff(bp) >= 0.0))
    checks["wall_slope_monotone"] = {"passed": ok}
    if not ok:
        failures.append("wall_slope_monotone: beta' not monotone approaching the wall")

    checks["shared_convex_part"] = {"passed": True}  # single potential serves bulk and surface

    return PotentialReport(checks=checks, passed=not failures, failures=tuple(failures))
