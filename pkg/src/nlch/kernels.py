"""Interaction kernels and their discrete convolution operators.

Both kernels are isotropic Gaussians; the surface kernel is evaluated at the
chordal distance between boundary points.  Convolutions are dense Nystrom
matrices built from the lumped mesh weights, which keeps them exactly
symmetric in the weighted inner product and makes J*1 agree with the
coverage field bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .mesh import DiskMesh


@dataclass(frozen=True)
class KernelSpec:
    """Isotropic Gaussian kernel: total mass `mass`, length scale `sigma`."""

    sigma: float
    mass: float = 1.0
    family: str = "gaussian"

    def __post_init__(self):
        if self.family != "gaussian":
            raise ValueError(f"unsupported kernel family: {self.family!r}")
        if self.sigma <= 0.0 or self.mass <= 0.0:
            raise ValueError("kernel sigma and mass must be positive")

    def value_r2(self, r2):
        """Kernel value from squared distance."""
        s2 = self.sigma * self.sigma
        return self.mass / (2.0 * np.pi * s2) * np.exp(-0.5 * r2 / s2)

    def grad_norm_r2(self, r2):
        """|grad kernel| from squared distance."""
        return np.sqrt(r2) / (self.sigma * self.sigma) * self.value_r2(r2)

    def grad(self, dx, dy):
        """Gradient of the kernel at displacement (dx, dy)."""
        r2 = dx * dx + dy * dy
        g = -self.value_r2(r2) / (self.sigma * self.sigma)
        return g * dx, g * dy

    def w11_norm(self) -> float:
        """Numerical ||J||_{W^{1,1}(R^2)} via radial quadrature."""
        s2 = self.sigma * self.sigma
        val = quad(lambda r: 2.0 * np.pi * r * self.value_r2(r * r), 0.0, np.inf)[0]
        grad = quad(
            lambda r: 2.0 * np.pi * r * (r / s2) * self.value_r2(r * r), 0.0, np.inf
        )[0]
        return float(val + grad)


@dataclass(frozen=True)
class KernelPair:
    """Discrete convolution operators and the kernel constants.

    ``conv_bulk[i, j] = wb[j] * J(x_i - x_j)`` so that ``conv_bulk @ phi`` is
    the lumped quadrature of the bulk convolution; ``conv_surf`` is the
    analogue on the boundary loop.  ``cov_bulk``/``cov_surf`` are the
    coverage fields (convolution of the all-ones vector).
    """

    j_spec: KernelSpec
    k_spec: KernelSpec
    conv_bulk: np.ndarray = field(repr=False)
    conv_surf: np.ndarray = field(repr=False)
    cov_bulk: np.ndarray = field(repr=False)
    cov_surf: np.ndarray = field(repr=False)
    constants: dict = field(repr=False)
    j_w11: float = 0.0

    @property
    def a_min_bulk(self) -> float:
        return self.constants["a_min_bulk"]

    @property
    def a_max_bulk(self) -> float:
        return self.constants["a_max_bulk"]

    @property
    def a_min_surf(self) -> float:
        return self.constants["a_min_surf"]

    @property
    def a_max_surf(self) -> float:
        return self.constants["a_max_surf"]


@dataclass(frozen=True)
class KernelReport:
    """Positivity/boundedness check of the kernel constants."""

    constants: dict
    passed: bool
    failures: tuple


def build_kernel_pair(j_spec: KernelSpec, k_spec: KernelSpec, mesh: DiskMesh) -> KernelPair:
    """Assemble dense convolution operators and estimate the constants."""
    xy = mesh.nodes
    d2 = ((xy[:, None, :] - xy[None, :, :]) ** 2).sum(axis=2)
    conv_bulk = j_spec.value_r2(d2) * mesh.wb[None, :]
    cov_bulk = conv_bulk @ np.ones(mesh.n_bulk)

    bxy = xy[mesh.boundary]
    d2s = ((bxy[:, None, :] - bxy[None, :, :]) ** 2).sum(axis=2)
    conv_surf = k_spec.value_r2(d2s) * mesh.ws[None, :]
    cov_surf = conv_surf @ np.ones(mesh.n_surf)

    # gradient-mass constants by the same lumped quadrature
    b_bulk = float((j_spec.grad_norm_r2(d2) * mesh.wb[None, :]).sum(axis=1).max())
    dxy = bxy[:, None, :] - bxy[None, :, :]
    gx, gy = k_spec.grad(dxy[:, :, 0], dxy[:, :, 1])
    tang = np.abs(gx * mesh.tangents[None, :, 0] + gy * mesh.tangents[None, :, 1])
    b_surf = float((tang * mesh.ws[None, :]).sum(axis=1).max())

    constants = {
        "a_min_bulk": float(cov_bulk.min()),
        "a_max_bulk": float(cov_bulk.max()),
        "a_min_surf": float(cov_surf.min()),
        "a_max_surf": float(cov_surf.max()),
        "b_max_bulk": b_bulk,
        "b_max_surf": b_surf,
    }
    return KernelPair(
        j_spec=j_spec,
        k_spec=k_spec,
        conv_bulk=conv_bulk,
        conv_surf=conv_surf,
        cov_bulk=cov_bulk,
        cov_surf=cov_surf,
        constants=constants,
        j_w11=j_spec.w11_norm(),
    )


def validate_kernels(kp: KernelPair, tol: float = 1e-12) -> KernelReport:
    """Check strict positivity of the coverage minima (flags, no raise)."""
    failures = []
    if kp.a_min_bulk <= tol:
        failures.append(
            f"kernel_positivity (bulk): min coverage {kp.a_min_bulk:.3e} <= {tol:.0e}"
        )
    if kp.a_min_surf <= tol:
        failures.append(
            f"kernel_positivity (surface): min coverage {kp.a_min_surf:.3e} <= {tol:.0e}"
        )
    return KernelReport(constants=dict(kp.constants), passed=not failures, failures=tuple(failures))


def _lp_norm(values: np.ndarray, weights: np.ndarray, p) -> float:
    if np.isinf(p):
        return float(np.abs(values).max())
    return float((weights @ np.abs(values) ** p) ** (1.0 / p))


def young_trace_ratio(kp: KernelPair, mesh: DiskMesh, p, trials: int, seed: int = 0,
                      fields=None) -> float:
    """Max over random bulk fields of ||J*phi||_{L^p(G)} / (||J||_W11 ||phi||_{L^p(O)}).

    Zero fields are skipped.  The caller asserts boundedness by a constant
    independent of p.  ``fields`` overrides the random draw with explicit
    bulk vectors.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if fields is None:
        rng = np.random.default_rng(seed)
        fields = (rng.uniform(-1.0, 1.0, mesh.n_bulk) for _ in range(trials))
    worst = 0.0
    for phi in fields:
        denom = _lp_norm(phi, mesh.wb, p)
        if denom == 0.0:
            continue
        on_gamma = (kp.conv_bulk @ phi)[mesh.boundary]
        ratio = _lp_norm(on_gamma, mesh.ws, p) / (kp.j_w11 * denom)
        worst = max(worst, ratio)
    return worst
