import numpy as np
import pytest

from nlch.kernels import KernelSpec, build_kernel_pair
from nlch.mesh import build_disk_mesh
from nlch.potentials import LogPotential


@pytest.fixture(scope="session")
def mesh0():
    return build_disk_mesh(0)


@pytest.fixture(scope="session")
def mesh1():
    return build_disk_mesh(1)


@pytest.fixture(scope="session")
def mesh2():
    return build_disk_mesh(2)


@pytest.fixture(scope="session")
def kp1(mesh1):
    return build_kernel_pair(KernelSpec(sigma=0.35, mass=2.0),
                             KernelSpec(sigma=0.35, mass=2.0), mesh1)


@pytest.fixture(scope="session")
def kp2(mesh2):
    return build_kernel_pair(KernelSpec(sigma=0.35, mass=2.0),
                             KernelSpec(sigma=0.35, mass=2.0), mesh2)


@pytest.fixture(scope="session")
def pot():
    return LogPotential(theta=0.5, theta0=1.0)
