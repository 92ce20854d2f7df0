import numpy as np
import pytest

from slm import camgeom


@pytest.fixture
def identity_camera():
    """fx=fy=1000 camera at the world origin looking along +z."""
    K = camgeom.Intrinsics(fx=1000, fy=1000, cx=2000, cy=3000,
                           width=4000, height=6000)
    return camgeom.CameraRecord("ID", K, np.eye(4))


@pytest.fixture
def small_camera():
    """64x64 camera at the origin for cheap raster tests."""
    K = camgeom.Intrinsics(fx=64, fy=64, cx=31.5, cy=31.5, width=64, height=64)
    return camgeom.CameraRecord("S", K, np.eye(4))


def random_frustum_mesh(rng, n_faces, z_range=(1.5, 4.0), spread=1.2):
    """Random triangle soup strictly in front of an origin camera."""
    from slm.meshops import TriMesh

    centers = np.column_stack([
        rng.uniform(-spread, spread, n_faces),
        rng.uniform(-spread, spread, n_faces),
        rng.uniform(*z_range, n_faces),
    ])
    offsets = rng.normal(scale=0.35, size=(n_faces, 3, 3))
    verts = (centers[:, None, :] + offsets).reshape(-1, 3)
    verts[:, 2] = np.clip(verts[:, 2], z_range[0] * 0.5, z_range[1] * 1.5)
    faces = np.arange(n_faces * 3).reshape(-1, 3)
    return TriMesh(verts, faces)
