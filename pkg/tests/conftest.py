import os

import numpy as np
import pytest

from material import CosseratMaterial2D, CosseratMaterial3D
from mesh import facet_classification, generate_box_mesh, generate_rect_mesh
from reconstruction import build_operators

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


@pytest.fixture
def rect_mesh():
    """4 x 2 structured triangulation of [0, 1] x [0, 0.5]."""
    return generate_rect_mesh(1.0, 0.5, 4, 2)


@pytest.fixture
def jittered_mesh():
    return generate_rect_mesh(1.0, 1.0, 6, 6, jitter=0.2, seed=3)


@pytest.fixture
def box_mesh():
    return generate_box_mesh(1.0, 1.0, 1.0, 2, 2, 2)


@pytest.fixture
def mat2d():
    return CosseratMaterial2D(G=1.0e3, nu=0.25, a=0.5, ell=0.1)


@pytest.fixture
def mat3d():
    return CosseratMaterial3D(K=16.67e9, G=10.0e9, Gc=5.0e9, L=1.0e3, M=2.5e3, Mc=2.5e3, rho=2500.0, I=0.4)


@pytest.fixture
def rect_ops(rect_mesh):
    return build_operators(rect_mesh)


@pytest.fixture
def neumann_partition(rect_mesh):
    return facet_classification(rect_mesh, set())


def rigid_motion_2d(points: np.ndarray, omega: float, x0=(0.0, 0.0)):
    """Cosserat rigid motion: u = omega (-(y - y0), x - x0), phi = omega."""
    rel = points - np.asarray(x0)
    u = omega * np.column_stack([-rel[:, 1], rel[:, 0]])
    return u, np.full(len(points), omega)


@pytest.fixture
def jittered_box_mesh():
    return generate_box_mesh(1.0, 1.0, 1.0, 3, 3, 3, jitter=0.1, seed=7)


def rigid_motion_3d(points: np.ndarray, omega, x0=(0.0, 0.0, 0.0), shift=(0.0, 0.0, 0.0)):
    """Cosserat rigid motion: u = shift + omega x (x - x0), phi = omega."""
    omega = np.asarray(omega, dtype=float)
    u = np.cross(omega, points - np.asarray(x0)) + np.asarray(shift)
    return u, np.tile(omega, (len(points), 1))


@pytest.fixture(params=[2, 3], ids=["2d", "3d"])
def dem_setup(request):
    """(mesh, material, operators) on a jittered triangle mesh and a jittered tetrahedral box."""
    if request.param == 2:
        mesh, mat = request.getfixturevalue("jittered_mesh"), request.getfixturevalue("mat2d")
    else:
        mesh, mat = request.getfixturevalue("jittered_box_mesh"), request.getfixturevalue("mat3d")
    return mesh, mat, build_operators(mesh)


def rigid_dofs(mesh, mat) -> np.ndarray:
    """Dof vector of a rotation about an off-origin center plus a translation."""
    if mesh.dim == 2:
        u, phi = rigid_motion_2d(mesh.cell_centers, 0.7, x0=(0.3, 0.2))
        u = u + np.array([1.0, -2.0])
    else:
        u, phi = rigid_motion_3d(mesh.cell_centers, (0.2, -0.5, 0.7), x0=(0.5, 0.4, 0.3), shift=(1.0, 2.0, -3.0))
    return np.hstack([u, np.asarray(phi).reshape(len(u), -1)]).ravel()
