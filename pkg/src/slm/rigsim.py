"""Virtual capture rig: camera array generation and synthetic sessions.

Reproduces the physical rig (poles on a circle, several mounting heights,
portrait cameras aimed at the axis) as CameraRecords, and synthesizes full
ground-truth sessions from any textured canonical mesh: painted lesions,
rendered views, depth, masks, per-image ground-truth boxes and the 3D
lesion registry.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field, replace

import numpy as np

from . import camgeom, fileio, render
from .camgeom import CameraRecord
from .meshops import TriMesh


@dataclass(frozen=True)
class RigConfig:
    """Geometry and optics of the virtual rig."""

    n_poles: int = 15
    heights_m: tuple = (0.3, 0.8, 1.3, 1.8)
    radius_m: float = 1.1
    width: int = 4000
    height: int = 6000
    focal_mm: float = 18.0
    sensor_width_mm: float = 22.3
    look_at_height_m: tuple | None = None  # per-height aim; None = own height
    capture: render.CaptureCylinder = field(default_factory=render.CaptureCylinder)

    def __post_init__(self):
        if self.n_poles < 3:
            raise ValueError("rig needs at least 3 poles")
        if self.radius_m <= 0:
            raise ValueError("rig radius must be positive")
        h = tuple(self.heights_m)
        if any(b <= a for a, b in zip(h, h[1:])):
            raise ValueError("camera heights must be strictly increasing")
        if self.look_at_height_m is not None \
                and len(self.look_at_height_m) != len(h):
            raise ValueError("look_at_height_m must match heights_m")

    def scaled(self, factor: float) -> "RigConfig":
        """Same rig with image resolution scaled by ``factor``."""
        return replace(self, width=int(round(self.width * factor)),
                       height=int(round(self.height * factor)))

    @property
    def min_box_px(self) -> float:
        """Ground-truth visibility floor, resolution-proportional (5 px at
        the full 4000 px width)."""
        return max(2.0, 5.0 * self.width / 4000.0)


@dataclass(frozen=True)
class SyntheticLesionSpec:
    """One painted ground-truth lesion."""

    surface_point: np.ndarray
    diameter_mm: float
    color: tuple = (92, 52, 40)
    id: int = 0

    def __post_init__(self):
        if self.diameter_mm <= 0:
            raise ValueError("lesion diameter must be positive")
        object.__setattr__(self, "surface_point",
                           np.asarray(self.surface_point, dtype=np.float64))

    @property
    def radius_m(self) -> float:
        return self.diameter_mm / 2000.0


def pole_letter(k: int) -> str:
    return string.ascii_uppercase[k]


def generate_rig(cfg: RigConfig) -> list[CameraRecord]:
    """Camera records for every pole/height slot.

    Pole k sits at azimuth 360k/n_poles on the rig circle; ids are
    "<pole letter><height index>" with indices counted bottom-up from 1.
    """
    if cfg.n_poles > 26:
        raise ValueError("pole ids support at most 26 poles")
    K = camgeom.intrinsics_from_rig(cfg.focal_mm, cfg.sensor_width_mm,
                                    cfg.width, cfg.height)
    cams = []
    for k in range(cfg.n_poles):
        az = 2.0 * np.pi * k / cfg.n_poles
        x, z = cfg.radius_m * np.cos(az), cfg.radius_m * np.sin(az)
        for hi, h in enumerate(cfg.heights_m):
            aim = h if cfg.look_at_height_m is None else cfg.look_at_height_m[hi]
            pose = camgeom.look_at((x, h, z), (0.0, aim, 0.0))
            cam_id = f"{pole_letter(k)}{hi + 1}"
            cams.append(CameraRecord(cam_id, K, pose,
                                     image_path=f"images/{cam_id}.png"))
    return cams


# ------------------------------------------------------------ lesion painting

def paint_lesions(mesh: TriMesh, lesions: list[SyntheticLesionSpec],
                  surface_tol: float = 1e-3) -> TriMesh:
    """Paint each lesion as a filled surface disk into a copy of the texture.

    Texels are colored when their 3D position (via the UV chart) lies within
    the lesion radius of its surface point; for the small diameters involved
    this matches a geodesic disk. Lesion points farther than ``surface_tol``
    from the mesh raise.
    """
    if mesh.uvs is None or mesh.texture is None:
        raise ValueError("lesion painting needs a UV-mapped textured mesh")
    from .meshops import point_mesh_distances

    if lesions:
        pts = np.stack([l.surface_point for l in lesions])
        off = point_mesh_distances(pts, mesh)
        bad = np.nonzero(off > surface_tol)[0]
        if bad.size:
            raise ValueError(
                f"lesion {lesions[bad[0]].id} is {off[bad[0]]:.4f} m off the surface")

    texture = mesh.texture.copy()
    th, tw = texture.shape[:2]
    tri = mesh.triangles()
    centers = tri.mean(axis=1)
    reach = np.linalg.norm(tri - centers[:, None, :], axis=2).max(axis=1)

    for les in lesions:
        rad = les.radius_m
        cand = np.nonzero(
            np.linalg.norm(centers - les.surface_point, axis=1) <= rad + reach
        )[0]
        color = np.asarray(les.color, dtype=np.uint8)
        for f in cand:
            _paint_face(texture, mesh.uvs[f], tri[f], les.surface_point, rad,
                        color, th, tw)
    return TriMesh(mesh.vertices, mesh.faces, mesh.uvs, texture)


def _paint_face(texture, uv, corners, center, radius, color, th, tw):
    """Rasterize one face's UV triangle; color texels within the lesion."""
    px = uv * (tw, th)  # texel-space corner positions
    lo = np.floor(px.min(axis=0)).astype(int)
    hi = np.ceil(px.max(axis=0)).astype(int)
    lo = np.maximum(lo, 0)
    hi = np.minimum(hi, (tw - 1, th - 1))
    if (hi < lo).any():
        return
    jj, ii = np.meshgrid(np.arange(lo[0], hi[0] + 1),
                         np.arange(lo[1], hi[1] + 1))
    pts = np.stack([jj + 0.5, ii + 0.5], axis=-1).reshape(-1, 2)
    a, b, c = px
    det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
    if det == 0:
        return
    w0 = ((b[0] - pts[:, 0]) * (c[1] - pts[:, 1])
          - (c[0] - pts[:, 0]) * (b[1] - pts[:, 1])) / det
    w1 = ((c[0] - pts[:, 0]) * (a[1] - pts[:, 1])
          - (a[0] - pts[:, 0]) * (c[1] - pts[:, 1])) / det
    w2 = 1.0 - w0 - w1
    eps = 1e-9
    inside = (w0 >= -eps) & (w1 >= -eps) & (w2 >= -eps)
    if not inside.any():
        return
    pos = (w0[inside, None] * corners[0] + w1[inside, None] * corners[1]
           + w2[inside, None] * corners[2])
    hit = np.linalg.norm(pos - center, axis=1) <= radius
    if not hit.any():
        return
    sel = pts[inside][hit].astype(int)
    texture[sel[:, 1], sel[:, 0]] = color


# --------------------------------------------------------------- ground truth

def gt_boxes_for_camera(cam: CameraRecord, depth: render.DepthImage,
                        lesions: list[SyntheticLesionSpec],
                        occlusion_tol: float = 0.005,
                        min_box_px: float = 2.0) -> dict[int, tuple]:
    """Tight ground-truth boxes of every lesion visible in this view.

    A lesion counts as visible when its surface point projects inside the
    image, survives the depth test (within ``occlusion_tol``), and its
    covering pixels span at least ``min_box_px`` per side.
    Returns {lesion id: (x, y, w, h)}.
    """
    K = cam.intrinsics
    boxes: dict[int, tuple] = {}
    world = None
    for les in lesions:
        try:
            px, z = camgeom.project(les.surface_point, cam)
        except camgeom.BehindCameraError:
            continue
        cx, cy = int(round(px[0])), int(round(px[1]))
        if not (0 <= cx < K.width and 0 <= cy < K.height):
            continue
        d = float(depth.values[cy, cx])
        if not np.isfinite(d) or abs(d - z) > occlusion_tol:
            continue
        if world is None:
            world = render.lift_depth_image(depth, cam)
        rad_px = int(np.ceil(K.fx * les.radius_m / z * 1.6)) + 2
        x0, x1 = max(cx - rad_px, 0), min(cx + rad_px, K.width - 1)
        y0, y1 = max(cy - rad_px, 0), min(cy + rad_px, K.height - 1)
        patch = world[y0:y1 + 1, x0:x1 + 1]
        with np.errstate(invalid="ignore"):
            close = (np.linalg.norm(patch - les.surface_point, axis=2)
                     <= les.radius_m)
        ys, xs = np.nonzero(close)
        if len(xs) == 0:
            continue
        w = int(xs.max() - xs.min() + 1)
        h = int(ys.max() - ys.min() + 1)
        if min(w, h) < min_box_px:
            continue
        boxes[les.id] = (int(x0 + xs.min()), int(y0 + ys.min()), w, h)
    return boxes


# ------------------------------------------------------------------- sessions

def synthesize_session(mesh: TriMesh, cfg: RigConfig,
                       lesions: list[SyntheticLesionSpec], seed: int,
                       out_dir, subject_id: str = "phantom",
                       flat_color=render.DEFAULT_FLAT_COLOR) -> dict:
    """Render a full synthetic capture session with ground truth.

    Writes the session directory layout (images/, depth/, masks/,
    cameras.json, mesh/, gt/) and returns the manifest dictionary. The mesh
    must already be canonical: origin between the feet, +y up, meters.
    """
    from pathlib import Path

    from .detect import Detection2D, save_detections
    from .track import snap_to_vertex

    out = Path(out_dir)
    for sub in ("images", "depth", "masks", "mesh", "gt"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    painted = paint_lesions(mesh, lesions)
    painted.save(out / "mesh" / "body.obj")
    cams = generate_rig(cfg)
    camgeom.save_cameras(cams, out / "cameras.json")

    gt_dets: dict[str, list[Detection2D]] = {}
    members: dict[int, list] = {l.id: [] for l in lesions}
    images_meta = []
    for cam in cams:
        color, depth = render.rasterize(painted, cam, flat_color=flat_color)
        mask = render.subject_mask(depth, cam, cfg.capture)
        fileio.write_png(out / "images" / f"{cam.id}.png", color)
        fileio.write_pfm(out / "depth" / f"{cam.id}.pfm", depth.values)
        fileio.write_png(out / "masks" / f"{cam.id}.png", mask.values)
        boxes = gt_boxes_for_camera(cam, depth, lesions,
                                    min_box_px=cfg.min_box_px)
        dets = []
        for det_id, (les_id, bbox) in enumerate(sorted(boxes.items())):
            dets.append(Detection2D(image_id=cam.id, det_id=det_id,
                                    bbox=bbox, score=1.0,
                                    source="ground_truth"))
            members[les_id].append({"image_id": cam.id, "det_id": det_id})
        gt_dets[cam.id] = dets
        images_meta.append({"id": cam.id, "pole": cam.id[:-1],
                            "height_index": int(cam.id[-1]),
                            "path": f"images/{cam.id}.png"})

    save_detections(out / "gt" / "detections.json", gt_dets)
    gt_lesions = []
    for les in lesions:
        vi = snap_to_vertex(les.surface_point, painted)
        gt_lesions.append({
            "global_id": les.id,
            "centroid": [float(v) for v in les.surface_point],
            "normal": [float(v) for v in painted.vertex_normals[vi]],
            "nearest_vertex": int(vi),
            "members": members[les.id],
            "diameter_mm": les.diameter_mm,
        })
    fileio.write_json_atomic(out / "gt" / "lesions3d.json",
                             {"lesions": gt_lesions, "rejected": []})

    manifest = {
        "subject_id": subject_id,
        "seed": seed,
        "rig": {"n_poles": cfg.n_poles, "heights_m": list(cfg.heights_m),
                "radius_m": cfg.radius_m, "width": cfg.width,
                "height": cfg.height, "focal_mm": cfg.focal_mm,
                "sensor_width_mm": cfg.sensor_width_mm},
        "images": images_meta,
    }
    return manifest


def random_lesions(mesh: TriMesh, n: int, seed: int,
                   diameter_range_mm=(6.0, 12.0), y_range=(0.25, 1.55),
                   min_separation_m: float = 0.08) -> list[SyntheticLesionSpec]:
    """Well-separated random lesion specs on the mesh surface (at vertices)."""
    rng = np.random.default_rng(seed)
    verts = mesh.vertices
    ok = np.nonzero((verts[:, 1] >= y_range[0]) & (verts[:, 1] <= y_range[1]))[0]
    if len(ok) < n:
        raise ValueError("mesh has too few vertices in the allowed band")
    chosen: list[int] = []
    order = rng.permutation(ok)
    for vi in order:
        if len(chosen) == n:
            break
        p = verts[vi]
        if all(np.linalg.norm(p - verts[c]) >= min_separation_m for c in chosen):
            chosen.append(int(vi))
    if len(chosen) < n:
        raise ValueError("could not place lesions with the requested separation")
    diam = rng.uniform(*diameter_range_mm, size=n)
    return [SyntheticLesionSpec(surface_point=verts[vi], diameter_mm=float(d),
                                id=i + 1)
            for i, (vi, d) in enumerate(zip(chosen, diam))]
