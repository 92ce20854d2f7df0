import numpy as np
import pytest

from slm import camgeom, fileio
from slm.meshops import TriMesh
from slm.render import (CaptureCylinder, DepthImage, rasterize,
                        subject_mask)
from slm.shapes import icosphere

from .conftest import random_frustum_mesh
from .oracles import raycast_depth


def fronto_parallel_triangle(z=2.0, half=50.0):
    verts = np.array([[-half, -half, z], [half, -half, z], [0.0, half, z]])
    return TriMesh(verts, [[0, 1, 2]])


class TestRasterize:
    def test_mesh_behind_camera_all_background(self, small_camera):
        mesh = fronto_parallel_triangle(z=-2.0)
        color, depth = rasterize(mesh, small_camera)
        assert not depth.covered().any()
        assert (color == 0).all()

    def test_constant_depth_plane(self, small_camera):
        mesh = fronto_parallel_triangle(z=2.0)
        _, depth = rasterize(mesh, small_camera)
        covered = depth.covered()
        assert covered.sum() > 1000
        assert np.abs(depth.values[covered] - 2.0).max() < 1e-5

    def test_sphere_principal_depth(self):
        K = camgeom.Intrinsics(256, 256, 127.5, 127.5, 256, 256)
        cam = camgeom.CameraRecord("S", K, np.eye(4))
        mesh = icosphere(1.0, 4, center=(0, 0, 3.0))
        _, depth = rasterize(mesh, cam)
        # ray-sphere oracle: first intersection at z = 3 - 1 = 2
        assert abs(float(depth.values[127, 127]) - 2.0) < 1e-3

    def test_degenerate_triangles_skipped(self, small_camera):
        verts = np.array([[0, 0, 2.0], [1, 0, 2.0], [2, 0, 2.0],
                          [-1, -1, 2.0], [1, -1, 2.0], [0, 1, 2.0]])
        mesh = TriMesh(verts, [[0, 1, 2], [3, 4, 5]])  # first is zero-area
        _, depth = rasterize(mesh, small_camera)
        assert depth.covered().any()

    def test_empty_mesh_raises(self, small_camera):
        with pytest.raises(ValueError):
            rasterize(TriMesh(np.zeros((0, 3)), np.zeros((0, 3))), small_camera)

    def test_occlusion_near_surface_wins(self, small_camera):
        near = fronto_parallel_triangle(z=1.5)
        far = fronto_parallel_triangle(z=3.0)
        both = TriMesh(np.vstack([near.vertices, far.vertices]),
                       [[0, 1, 2], [3, 4, 5]])
        _, depth = rasterize(both, small_camera)
        covered = depth.covered()
        assert np.abs(depth.values[covered] - 1.5).max() < 1e-5

    def test_texture_sampling(self, small_camera):
        tex = np.zeros((2, 2, 3), dtype=np.uint8)
        tex[0, 0] = (255, 0, 0)
        tex[0, 1] = (0, 255, 0)
        verts = np.array([[-2, -2, 2.0], [2, -2, 2.0], [-2, 2, 2.0]])
        uvs = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])
        mesh = TriMesh(verts, [[0, 1, 2]], uvs=uvs, texture=tex)
        color, depth = rasterize(mesh, small_camera)
        ys, xs = np.nonzero(depth.covered())
        # upper-left of the triangle maps to texel (0,0): red
        assert (color[ys.min() + 1, xs[ys == ys.min() + 1].min() + 1]
                == (255, 0, 0)).any()


class TestRasterAgainstRaycast:
    def test_depth_matches_raycast_oracle(self, small_camera):
        rng = np.random.default_rng(42)
        for trial in range(5):
            mesh = random_frustum_mesh(rng, n_faces=120)
            _, depth = rasterize(mesh, small_camera)
            oracle = raycast_depth(mesh, small_camera)
            both = depth.covered() & np.isfinite(oracle)
            either = depth.covered() | np.isfinite(oracle)
            agree = np.abs(depth.values[both] - oracle[both]) < 1e-4
            # coverage may differ on edge pixels; demand 99.9% agreement
            frac = (agree.sum() + 0.0) / max(either.sum(), 1)
            assert frac > 0.999, f"trial {trial}: {frac}"


class TestDepthConsistency:
    def test_masked_pixK_reprojects_within_half_pixel(self):
        K = camgeom.Intrinsics(200, 200, 63.5, 63.5, 128, 128)
        pose = camgeom.look_at((0, 1.0, 2.0), (0, 1.0, 0))
        cam = camgeom.CameraRecord("D", K, pose)
        mesh = icosphere(0.4, 3, center=(0, 1.0, 0))
        _, depth = rasterize(mesh, cam)
        cyl = CaptureCylinder(radius=0.8, y_min=0.0, y_max=2.2)
        mask = subject_mask(depth, cam, cyl)
        ys, xs = np.nonzero(mask.values)
        sel = slice(0, len(xs), 7)
        pts = camgeom.unproject(np.column_stack([xs[sel], ys[sel]]).astype(float),
                                depth.values[ys[sel], xs[sel]].astype(np.float64),
                                cam)
        px, _ = camgeom.project(pts, cam)
        err = np.abs(px - np.column_stack([xs[sel], ys[sel]]))
        assert err.max() < 0.5


class TestSubjectMask:
    def test_all_background_all_false(self, small_camera):
        depth = DepthImage(np.full((64, 64), np.inf, dtype=np.float32))
        mask = subject_mask(depth, small_camera, CaptureCylinder())
        assert not mask.values.any()

    def test_points_inside_and_outside_cylinder(self):
        K = camgeom.Intrinsics(100, 100, 31.5, 31.5, 64, 64)
        pose = camgeom.look_at((0, 1.1, 3.0), (0, 1.1, 0))
        cam = camgeom.CameraRecord("C", K, pose)
        cyl = CaptureCylinder(radius=0.5, y_min=0.0, y_max=2.2)

        # axis point at mid height: depth from camera = 3.0
        depth_vals = np.full((64, 64), np.inf, dtype=np.float32)
        depth_vals[31, 31] = 3.0
        mask = subject_mask(DepthImage(depth_vals), cam, cyl)
        assert mask.values[31, 31]

        # push the point past the cylinder wall toward the camera
        depth_vals[31, 31] = 3.0 - cyl.radius - 1e-3
        mask = subject_mask(DepthImage(depth_vals), cam, cyl)
        assert not mask.values[31, 31]

    def test_mask_true_implies_finite_depth(self, small_camera):
        rng = np.random.default_rng(0)
        vals = np.full((64, 64), np.inf, dtype=np.float32)
        idx = rng.integers(0, 64, size=(40, 2))
        vals[idx[:, 0], idx[:, 1]] = rng.uniform(0.5, 4.0, 40)
        mask = subject_mask(DepthImage(vals), small_camera,
                            CaptureCylinder(radius=5, y_min=-5, y_max=5))
        assert not (mask.values & ~np.isfinite(vals)).any()


class TestPerformanceBudget:
    def test_sixty_views_reduced_resolution_under_budget(self):
        import time

        from slm.rigsim import RigConfig, generate_rig
        from slm.shapes import capsule, skin_texture

        mesh = capsule(0.15, 1.75, n_theta=128, n_profile=200,
                       texture=skin_texture(512))
        assert mesh.n_faces >= 50_000
        cams = generate_rig(RigConfig().scaled(0.25))
        t0 = time.time()
        for cam in cams:
            rasterize(mesh, cam)
        assert time.time() - t0 < 60.0


class TestPfmRoundTrip:
    def test_depth_file_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        vals = rng.uniform(0.5, 3.0, size=(48, 32)).astype(np.float32)
        vals[0, 0] = np.inf
        path = tmp_path / "cam.pfm"
        fileio.write_pfm(path, vals)
        back = fileio.read_pfm(path)
        assert back.shape == vals.shape
        assert np.array_equal(back, vals)
        header = path.read_bytes()[:32]
        assert header.startswith(b"Pf\n32 48\n-1.0\n")
