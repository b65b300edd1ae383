"""Desk-scale laboratory for a nonlocal bulk-surface phase-field system.

Conserved gradient flow of a convolution-based free energy on the unit
disk, coupled to a surface flow on the boundary circle through a
kinetic-rate Robin condition (coefficient 1/L; L = 0 identifies the bulk
trace of the potential with its surface counterpart).  The singular
logarithmic double-well keeps the phase fields strictly inside (-1, 1).
"""

from ._accel import backend
from .kernels import KernelPair, KernelSpec, build_kernel_pair
from .mesh import DiskMesh, build_disk_mesh
from .potentials import LogPotential, SeparationError, YosidaState
from .spaces import BulkSurfaceField, Coupling, EllipticSolver
from .evolve import Integrator, SchemeConfig, SolverError
from .stationary import SteadyState, solve_steady

__all__ = [
    "backend",
    "BulkSurfaceField",
    "build_disk_mesh",
    "build_kernel_pair",
    "Coupling",
    "DiskMesh",
    "EllipticSolver",
    "Integrator",
    "KernelPair",
    "KernelSpec",
    "LogPotential",
    "SchemeConfig",
    "SeparationError",
    "SolverError",
    "SteadyState",
    "solve_steady",
    "YosidaState",
]

__version__ = "0.1.0"
