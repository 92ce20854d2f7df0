import json

import numpy as np
import pytest

from slm import camgeom
from slm.render import rasterize, subject_mask
from slm.rigsim import (RigConfig, SyntheticLesionSpec, generate_rig,
                        gt_boxes_for_camera, paint_lesions, random_lesions,
                        synthesize_session)
from slm.shapes import capsule, skin_texture


@pytest.fixture(scope="module")
def phantom():
    return capsule(0.15, 1.75, n_theta=96, n_profile=160,
                   texture=skin_texture(1024))


def tiny_rig():
    """Cheap rig for unit tests: 15 poles, 2 heights, low resolution."""
    return RigConfig(heights_m=(0.8, 1.3), width=250, height=375)


class TestRigConfig:
    def test_defaults_give_sixty_cameras(self):
        assert len(generate_rig(RigConfig())) == 60

    def test_adjacent_pole_spacing_24_degrees(self):
        cams = generate_rig(RigConfig())
        a = next(c for c in cams if c.id == "A1").center
        b = next(c for c in cams if c.id == "B1").center
        ang = np.degrees(np.arccos(
            (a * b)[[0, 2]].sum() / (np.hypot(a[0], a[2]) * np.hypot(b[0], b[2]))))
        assert ang == pytest.approx(24.0, abs=1e-9)

    def test_four_pole_symmetry(self):
        cams = generate_rig(RigConfig(n_poles=4, heights_m=(1.0,)))
        assert len(cams) == 4
        assert all(c.center[1] == 1.0 for c in cams)
        azimuths = sorted(np.degrees(np.arctan2(c.center[2], c.center[0]))
                          % 360 for c in cams)
        assert np.allclose(azimuths, [0, 90, 180, 270])

    def test_ids_pole_letter_and_height_index(self):
        ids = {c.id for c in generate_rig(RigConfig())}
        assert "A1" in ids and "A4" in ids and "O4" in ids
        assert len(ids) == 60

    def test_cameras_aim_at_axis(self):
        for cam in generate_rig(RigConfig(n_poles=5, heights_m=(0.5, 1.5))):
            target = np.array([0.0, cam.center[1], 0.0])
            to_axis = target - cam.center
            to_axis /= np.linalg.norm(to_axis)
            assert cam.view_axis @ to_axis > 1 - 1e-12

    def test_invalid_configs(self):
        with pytest.raises(ValueError):
            RigConfig(n_poles=2)
        with pytest.raises(ValueError):
            RigConfig(heights_m=(1.0, 0.5))
        with pytest.raises(ValueError):
            RigConfig(radius_m=0)

    def test_scaled_resolution(self):
        cfg = RigConfig().scaled(0.25)
        assert (cfg.width, cfg.height) == (1000, 1500)
        assert cfg.min_box_px == 2.0  # 5 px at full width, floored at 2
        assert RigConfig().min_box_px == 5.0


class TestPaintLesions:
    def test_paints_texels_near_point(self, phantom):
        spec = SyntheticLesionSpec(
            surface_point=phantom.vertices[len(phantom) // 2],
            diameter_mm=10.0, id=1)
        painted = paint_lesions(phantom, [spec])
        changed = (painted.texture != phantom.texture).any(axis=2)
        assert changed.any()
        assert not np.array_equal(painted.texture, phantom.texture)

    def test_off_surface_point_rejected(self, phantom):
        spec = SyntheticLesionSpec(surface_point=(2.0, 2.0, 2.0),
                                   diameter_mm=8.0, id=1)
        with pytest.raises(ValueError):
            paint_lesions(phantom, [spec])

    def test_invalid_diameter(self):
        with pytest.raises(ValueError):
            SyntheticLesionSpec(surface_point=(0, 0, 0), diameter_mm=0.0)


class TestGroundTruthBoxes:
    def test_box_lift_lands_near_lesion(self, phantom):
        spec = SyntheticLesionSpec(
            surface_point=phantom.vertices[len(phantom) // 2],
            diameter_mm=12.0, id=7)
        painted = paint_lesions(phantom, [spec])
        cfg = tiny_rig()
        for cam in generate_rig(cfg):
            _, depth = rasterize(painted, cam)
            boxes = gt_boxes_for_camera(cam, depth, [spec],
                                        min_box_px=cfg.min_box_px)
            if 7 not in boxes:
                continue
            x, y, w, h = boxes[7]
            cx, cy = int(x + (w - 1) / 2), int(y + (h - 1) / 2)
            d = float(depth.values[cy, cx])
            assert np.isfinite(d)
            p = camgeom.unproject((cx, cy), d, cam)
            assert np.linalg.norm(p - spec.surface_point) < 0.006 + 0.003

    def test_occluded_lesion_invisible(self, phantom):
        # a lesion on the far side of the capsule from the camera
        cam = generate_rig(tiny_rig())[0]  # pole A, near +x axis
        far_side = min(
            range(len(phantom)),
            key=lambda i: phantom.vertices[i][0]
            if abs(phantom.vertices[i][1] - 1.0) < 0.02 else np.inf)
        spec = SyntheticLesionSpec(surface_point=phantom.vertices[far_side],
                                   diameter_mm=10.0, id=3)
        painted = paint_lesions(phantom, [spec])
        _, depth = rasterize(painted, cam)
        assert gt_boxes_for_camera(cam, depth, [spec]) == {}


class TestRandomLesions:
    def test_separation_and_band(self, phantom):
        lesions = random_lesions(phantom, 15, seed=4, y_range=(0.3, 1.5),
                                 min_separation_m=0.08)
        pts = np.stack([l.surface_point for l in lesions])
        assert (pts[:, 1] >= 0.3).all() and (pts[:, 1] <= 1.5).all()
        d = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
        np.fill_diagonal(d, np.inf)
        assert d.min() >= 0.08

    def test_deterministic_under_seed(self, phantom):
        a = random_lesions(phantom, 5, seed=9)
        b = random_lesions(phantom, 5, seed=9)
        assert all(np.array_equal(x.surface_point, y.surface_point)
                   for x, y in zip(a, b))


class TestSynthesizeSession:
    def test_zero_lesions_empty_ground_truth(self, phantom, tmp_path):
        cfg = RigConfig(n_poles=3, heights_m=(1.0,), width=128, height=192)
        synthesize_session(phantom, cfg, [], seed=0, out_dir=tmp_path / "s")
        gt = json.loads((tmp_path / "s/gt/detections.json").read_text())
        assert set(gt) == {"A1", "B1", "C1"}
        assert all(v == [] for v in gt.values())
        les = json.loads((tmp_path / "s/gt/lesions3d.json").read_text())
        assert les["lesions"] == []

    def test_session_layout_and_visibility(self, phantom, tmp_path):
        cfg = tiny_rig()
        chest = min(range(len(phantom)),
                    key=lambda i: abs(phantom.vertices[i][1] - 1.3)
                    + abs(phantom.vertices[i][0] - 0.15))
        spec = SyntheticLesionSpec(surface_point=phantom.vertices[chest],
                                   diameter_mm=14.0, id=1)
        out = tmp_path / "sess"
        synthesize_session(phantom, cfg, [spec], seed=0, out_dir=out)
        for sub in ("images", "depth", "masks", "gt", "mesh"):
            assert (out / sub).exists()
        assert (out / "cameras.json").exists()
        assert len(list((out / "images").glob("*.png"))) == 30

        les = json.loads((out / "gt/lesions3d.json").read_text())
        members = les["lesions"][0]["members"]
        # frontal lesion: visible from at least 5 views of the 30-camera rig
        assert len(members) >= 5
        poles = {m["image_id"][0] for m in members}
        # +x side lesion must be seen from front poles, not the back ones
        assert poles & {"A", "B", "O"}
        assert "H" not in poles  # opposite side (pole H is at ~168 degrees)


class TestMaskCoverage:
    def test_union_of_masks_covers_band(self, phantom):
        from slm.meshops import sample_surface

        cfg = RigConfig(heights_m=(0.3, 0.8, 1.3, 1.8), width=250, height=375)
        cams = generate_rig(cfg)
        pts = sample_surface(phantom, 4000, seed=3)
        band = (pts[:, 1] >= 0.2) & (pts[:, 1] <= 1.75 - 0.05)
        pts = pts[band]
        covered = np.zeros(len(pts), dtype=bool)
        for cam in cams:
            _, depth = rasterize(phantom, cam)
            mask = subject_mask(depth, cam, cfg.capture)
            try:
                px, z = camgeom.project(pts, cam)
            except camgeom.BehindCameraError:
                continue
            xi = np.round(px[:, 0]).astype(int)
            yi = np.round(px[:, 1]).astype(int)
            ok = (xi >= 0) & (xi < cfg.width) & (yi >= 0) & (yi < cfg.height)
            vis = ok.copy()
            vis[ok] &= np.abs(depth.values[yi[ok], xi[ok]] - z[ok]) < 0.01
            vis[ok] &= mask.values[yi[ok], xi[ok]]
            covered |= vis
        assert covered.mean() >= 0.99
