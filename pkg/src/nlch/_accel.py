"""Hot nodewise kernels: logarithmic potential arrays and Yosida resolvents.

Two interchangeable backends are provided.  The numba backend compiles the
per-node loops with ``@njit``; the numpy backend is a pure-vectorized
fallback.  Selection happens once at import time:

* ``NLCH_NO_NUMBA=1`` in the environment forces the numpy path,
* otherwise numba is used when importable.

Only pointwise work lives here.  All linear algebra (sparse factorizations,
dense convolution matvecs) stays in scipy/numpy regardless of backend.
"""

from __future__ import annotations

import os

import numpy as np

_LN2 = float(np.log(2.0))


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------

def _np_log_convex(s, theta):
    """Convex entropy part hat-beta(s) = theta/2 [(1+s)ln(1+s)+(1-s)ln(1-s)].

    Defined on [-1, 1]; the endpoints take the finite limit theta*ln(2).
    """
    s = np.asarray(s, dtype=np.float64)
    p = 1.0 + s
    q = 1.0 - s
    # x ln x -> 0 as x -> 0+
    term_p = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    term_q = np.where(q > 0.0, q * np.log(np.where(q > 0.0, q, 1.0)), 0.0)
    return 0.5 * theta * (term_p + term_q)


def _np_log_slope(s, theta):
    """beta(s) = theta/2 ln((1+s)/(1-s)) on (-1, 1)."""
    s = np.asarray(s, dtype=np.float64)
    return 0.5 * theta * (np.log1p(s) - np.log1p(-s))


def _np_log_curvature(s, theta):
    """beta'(s) = theta / (1 - s^2) on (-1, 1)."""
    s = np.asarray(s, dtype=np.float64)
    return theta / ((1.0 - s) * (1.0 + s))


def _np_resolvent(s, theta, eps, tol, max_iter):
    """Solve r + eps*beta(r) = s elementwise, r in (-1, 1).

    Safeguarded Newton: the map is strictly increasing with slope >= 1, so a
    bracketing bisection fallback makes the iteration globally convergent.
    """
    s = np.asarray(s, dtype=np.float64)
    lo = np.full(s.shape, -1.0)
    hi = np.full(s.shape, 1.0)
    r = np.clip(s, -1.0 + 1e-12, 1.0 - 1e-12)
    half_te = 0.5 * theta * eps
    for _ in range(max_iter):
        g = r + half_te * (np.log1p(r) - np.log1p(-r)) - s
        done = np.abs(g) <= tol * (1.0 + np.abs(s))
        if done.all():
            break
        lo = np.where(g < 0.0, r, lo)
        hi = np.where(g > 0.0, r, hi)
        dg = 1.0 + eps * theta / ((1.0 - r) * (1.0 + r))
        trial = r - g / dg
        bad = (trial <= lo) | (trial >= hi)
        trial = np.where(bad, 0.5 * (lo + hi), trial)
        r = np.where(done, r, trial)
    return r


# ---------------------------------------------------------------------------
# numba implementations (same arithmetic, explicit loops)
# ---------------------------------------------------------------------------

def _build_numba():
    from numba import njit

    @njit(cache=True)
    def nb_log_convex(s, theta):
        out = np.empty_like(s)
        for i in range(s.size):
            p = 1.0 + s[i]
            q = 1.0 - s[i]
            tp = p * np.log(p) if p > 0.0 else 0.0
            tq = q * np.log(q) if q > 0.0 else 0.0
            out[i] = 0.5 * theta * (tp + tq)
        return out

    @njit(cache=True)
    def nb_log_slope(s, theta):
        out = np.empty_like(s)
        for i in range(s.size):
            out[i] = 0.5 * theta * (np.log1p(s[i]) - np.log1p(-s[i]))
        return out

    @njit(cache=True)
    def nb_log_curvature(s, theta):
        out = np.empty_like(s)
        for i in range(s.size):
            out[i] = theta / ((1.0 - s[i]) * (1.0 + s[i]))
        return out

    @njit(cache=True)
    def nb_resolvent(s, theta, eps, tol, max_iter):
        out = np.empty_like(s)
        half_te = 0.5 * theta * eps
        for i in range(s.size):
            si = s[i]
            lo = -1.0
            hi = 1.0
            r = si
            if r <= -1.0 + 1e-12:
                r = -1.0 + 1e-12
            elif r >= 1.0 - 1e-12:
                r = 1.0 - 1e-12
            for _ in range(max_iter):
                g = r + half_te * (np.log1p(r) - np.log1p(-r)) - si
                if abs(g) <= tol * (1.0 + abs(si)):
                    break
                if g < 0.0:
                    lo = r
                else:
                    hi = r
                dg = 1.0 + eps * theta / ((1.0 - r) * (1.0 + r))
                trial = r - g / dg
                if trial <= lo or trial >= hi:
                    trial = 0.5 * (lo + hi)
                r = trial
            out[i] = r
        return out

    return {
        "log_convex": nb_log_convex,
        "log_slope": nb_log_slope,
        "log_curvature": nb_log_curvature,
        "resolvent": nb_resolvent,
    }


_NUMPY_IMPLS = {
    "log_convex": _np_log_convex,
    "log_slope": _np_log_slope,
    "log_curvature": _np_log_curvature,
    "resolvent": _np_resolvent,
}


def _select_backend():
    if os.environ.get("NLCH_NO_NUMBA", "").strip() not in ("", "0"):
        return "numpy", _NUMPY_IMPLS
    try:
        return "numba", _build_numba()
    except ImportError:
        return "numpy", _NUMPY_IMPLS


_BACKEND_NAME, _IMPLS = _select_backend()


def backend() -> str:
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return _BACKEND_NAME


def _as_array(s):
    return np.ascontiguousarray(np.atleast_1d(np.asarray(s, dtype=np.float64)))


def log_convex(s, theta):
    """hat-beta(s), elementwise, s in [-1, 1]."""
    a = _as_array(s)
    out = _IMPLS["log_convex"](a, float(theta))
    return out if np.ndim(s) else float(out[0])


def log_slope(s, theta):
    """beta(s), elementwise, s in (-1, 1)."""
    a = _as_array(s)
    out = _IMPLS["log_slope"](a, float(theta))
    return out if np.ndim(s) else float(out[0])


def log_curvature(s, theta):
    """beta'(s), elementwise, s in (-1, 1)."""
    a = _as_array(s)
    out = _IMPLS["log_curvature"](a, float(theta))
    return out if np.ndim(s) else float(out[0])


def resolvent(s, theta, eps, tol=1e-14, max_iter=200):
    """Resolvent r of the monotone graph: r + eps*beta(r) = s, any real s."""
    a = _as_array(s)
    out = _IMPLS["resolvent"](a, float(theta), float(eps), float(tol), int(max_iter))
    return out if np.ndim(s) else float(out[0])
