import json

import numpy as np
import pytest

from slm import camgeom
from slm.camgeom import (BehindCameraError, CameraRecord, Intrinsics,
                         intrinsics_from_rig, load_cameras, pixel_ray,
                         project, save_cameras, unproject)


class TestIntrinsicsFromRig:
    def test_rig_focal_conversion(self):
        K = intrinsics_from_rig(18, 22.3, 4000, 6000)
        assert K.fx == pytest.approx(3228.70, abs=0.01)
        assert K.fy == K.fx

    def test_focal_equals_sensor_width(self):
        assert intrinsics_from_rig(22.3, 22.3, 4000, 6000).fx == 4000

    def test_centered_principal_point(self):
        K = intrinsics_from_rig(18, 22.3, 4000, 6000)
        assert (K.cx, K.cy) == (1999.5, 2999.5)

    @pytest.mark.parametrize("bad", [(0, 22.3, 4000, 6000),
                                     (18, -1, 4000, 6000),
                                     (18, 22.3, 0, 6000)])
    def test_non_positive_inputs(self, bad):
        with pytest.raises(ValueError):
            intrinsics_from_rig(*bad)


class TestIntrinsicsInvariants:
    def test_negative_focal_rejected(self):
        with pytest.raises(ValueError):
            Intrinsics(fx=-1, fy=1, cx=0, cy=0, width=10, height=10)

    def test_principal_point_outside_rejected(self):
        with pytest.raises(ValueError):
            Intrinsics(fx=1, fy=1, cx=10, cy=0, width=10, height=10)


class TestCameraRecord:
    def test_rejects_non_orthonormal_rotation(self):
        T = np.eye(4)
        T[0, 0] = 2.0
        with pytest.raises(ValueError):
            CameraRecord("X", Intrinsics(1, 1, 0, 0, 2, 2), T)

    def test_rejects_reflection(self):
        T = np.eye(4)
        T[0, 0] = -1.0
        with pytest.raises(ValueError):
            CameraRecord("X", Intrinsics(1, 1, 0, 0, 2, 2), T)


class TestProject:
    def test_on_axis_point(self, identity_camera):
        px, depth = project(np.array([0.0, 0.0, 2.0]), identity_camera)
        assert np.allclose(px, (2000, 3000))
        assert depth == 2.0

    def test_off_axis_offset(self, identity_camera):
        px, depth = project(np.array([0.1, 0.0, 2.0]), identity_camera)
        assert np.allclose(px, (2050, 3000))
        assert depth == 2.0

    def test_behind_camera(self, identity_camera):
        with pytest.raises(BehindCameraError):
            project(np.array([0.0, 0.0, -1.0]), identity_camera)


class TestUnproject:
    def test_inverse_of_projection_example(self, identity_camera):
        p = unproject((2000, 3000), 2.0, identity_camera)
        assert np.allclose(p, (0, 0, 2))

    def test_round_trip_random(self, identity_camera):
        rng = np.random.default_rng(3)
        px = rng.uniform((0, 0), (4000, 6000), size=(500, 2))
        depth = rng.uniform(0.5, 5.0, size=500)
        world = unproject(px, depth, identity_camera)
        px2, d2 = project(world, identity_camera)
        assert np.abs(px2 - px).max() < 1e-9
        assert np.abs(d2 - depth).max() < 1e-9

    def test_translated_camera(self, identity_camera):
        T = np.eye(4)
        T[0, 3] = 1.0
        cam = CameraRecord("T", identity_camera.intrinsics, T)
        p = unproject((2000, 3000), 2.0, cam)
        assert np.allclose(p, (1, 0, 2))

    def test_non_positive_depth(self, identity_camera):
        with pytest.raises(ValueError):
            unproject((0, 0), 0.0, identity_camera)


class TestPixelRay:
    def test_principal_point_gives_view_axis(self, identity_camera):
        ray = pixel_ray(identity_camera, (2000, 3000))
        assert np.allclose(ray.direction, identity_camera.view_axis)

    def test_corner_pixel_sign(self, identity_camera):
        p = unproject((0.0, 0.0), 1.0, identity_camera)
        assert p[0] < 0 and p[1] < 0
        ray = pixel_ray(identity_camera, (0.0, 0.0))
        assert ray.direction[0] < 0 and ray.direction[1] < 0

    def test_ray_unproject_consistency(self, identity_camera):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            px = rng.uniform((0, 0), (4000, 6000))
            d = rng.uniform(0.2, 6.0)
            ray = pixel_ray(identity_camera, px)
            pw = unproject(px, d, identity_camera)
            t = (pw - ray.origin) @ ray.direction
            assert np.linalg.norm(ray.at(t) - pw) < 1e-9


class TestRigidInvariance:
    def test_transforming_camera_and_point_preserves_pixel(self):
        rng = np.random.default_rng(5)
        K = Intrinsics(1500, 1500, 500, 700, 1000, 1400)
        for _ in range(50):
            pose = camgeom.look_at(rng.uniform(-2, 2, 3),
                                   rng.uniform(-0.5, 0.5, 3))
            cam = CameraRecord("A", K, pose)
            point = cam.camera_to_world(rng.uniform((-.3, -.3, 1), (.3, .3, 4)))
            px, d = project(point, cam)

            extra = camgeom.look_at(rng.uniform(-1, 1, 3),
                                    rng.uniform(2, 3, 3))
            cam2 = CameraRecord("B", K, extra @ pose)
            point2 = extra[:3, :3] @ point + extra[:3, 3]
            px2, d2 = project(point2, cam2)
            assert np.abs(px2 - px).max() < 1e-9
            assert abs(d2 - d) < 1e-9


class TestCameraFile:
    def test_round_trip(self, tmp_path, identity_camera):
        pose = camgeom.look_at((1.1, 0.8, 0.0), (0, 0.8, 0))
        cam2 = CameraRecord("B2", identity_camera.intrinsics, pose,
                            image_path="images/B2.png")
        path = tmp_path / "cameras.json"
        save_cameras([identity_camera, cam2], path)
        loaded = load_cameras(path)
        assert [c.id for c in loaded] == ["ID", "B2"]
        assert np.allclose(loaded[1].world_from_camera, pose)
        assert loaded[1].image_path == "images/B2.png"

    def test_schema_fields(self, tmp_path, identity_camera):
        path = tmp_path / "cameras.json"
        save_cameras([identity_camera], path)
        rec = json.loads(path.read_text())[0]
        assert set(rec) == {"id", "width", "height", "fx", "fy", "cx", "cy",
                            "world_from_camera", "image"}
        assert len(rec["world_from_camera"]) == 16
