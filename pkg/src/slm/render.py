"""Software renderer: per-camera color image, depth image and subject mask.

A z-buffered scanline rasterizer (numba kernel) reproduces what an
OpenGL-style renderer would output: camera-frame z of the nearest surface
per pixel and flat ambient texture color. Back-face culling is disabled
because reconstructed body meshes may carry inconsistent winding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import raster_fill
from .camgeom import CameraRecord
from .meshops import TriMesh

BACKGROUND = np.inf  # depth sentinel for uncovered pixels
DEFAULT_FLAT_COLOR = (160, 160, 160)
Z_NEAR = 1e-6  # triangles reaching this close to the camera plane are skipped


@dataclass
class DepthImage:
    """Per-pixel camera-frame z in meters; +inf marks background."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        finite = self.values[np.isfinite(self.values)]
        if finite.size and finite.min() <= 0:
            raise ValueError("finite depth values must be positive")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def covered(self) -> np.ndarray:
        return np.isfinite(self.values)


@dataclass
class SubjectMask:
    """Boolean raster marking pixels whose 3D point is on the subject."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=bool)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class CaptureCylinder:
    """Vertical cylinder bounding the region attributed to the subject."""

    center_xz: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.8
    y_min: float = 0.0
    y_max: float = 2.2

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("capture radius must be positive")
        if self.y_max <= self.y_min:
            raise ValueError("capture cylinder must have y_max > y_min")

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        dx = p[..., 0] - self.center_xz[0]
        dz = p[..., 2] - self.center_xz[1]
        return (np.hypot(dx, dz) <= self.radius) \
            & (p[..., 1] >= self.y_min) & (p[..., 1] <= self.y_max)


def rasterize(mesh: TriMesh, cam: CameraRecord,
              flat_color=DEFAULT_FLAT_COLOR) -> tuple[np.ndarray, DepthImage]:
    """Render one camera view; returns (color uint8 HxWx3, DepthImage).

    Depth stores the camera-frame z of the nearest surface. Color samples the
    mesh texture at the nearest texel via perspective-correct UVs; meshes
    without a texture render in ``flat_color``. Pixels with no surface keep
    a black color and +inf depth. Triangles touching the camera plane
    (z <= Z_NEAR at any corner) are skipped, which is exact for rig-style
    captures where the subject is strictly in front of every camera.
    """
    if mesh.n_faces == 0:
        raise ValueError("cannot rasterize an empty mesh")
    K = cam.intrinsics
    depth = np.full((K.height, K.width), np.float32(np.inf), dtype=np.float32)
    color = np.zeros((K.height, K.width, 3), dtype=np.uint8)

    tri_cam = cam.world_to_camera(mesh.vertices)[mesh.faces]  # (M, 3, 3)
    z = tri_cam[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        px = np.empty_like(tri_cam[..., :2])
        px[..., 0] = K.fx * tri_cam[..., 0] / z + K.cx
        px[..., 1] = K.fy * tri_cam[..., 1] / z + K.cy

    if mesh.uvs is not None and mesh.texture is not None:
        uvs, texture, has_uv = mesh.uvs, mesh.texture, True
    else:
        uvs = np.zeros((mesh.n_faces, 3, 2))
        texture = np.zeros((1, 1, 3), dtype=np.uint8)
        has_uv = False
    bg = np.asarray(flat_color, dtype=np.uint8)
    raster_fill(np.ascontiguousarray(px), np.ascontiguousarray(z),
                np.ascontiguousarray(uvs), has_uv, texture, depth, color, bg,
                Z_NEAR)
    return color, DepthImage(depth)


def lift_depth_image(depth: DepthImage, cam: CameraRecord) -> np.ndarray:
    """Unproject a whole depth raster to world points, shape (H, W, 3).

    Background pixels come back non-finite.
    """
    K = cam.intrinsics
    xs = np.arange(K.width, dtype=np.float64)
    ys = np.arange(K.height, dtype=np.float64)
    z = depth.values.astype(np.float64)
    with np.errstate(invalid="ignore"):  # background inf -> nan coordinates
        x = (xs[None, :] - K.cx) / K.fx * z
        y = (ys[:, None] - K.cy) / K.fy * z
        pc = np.stack([x, y, z], axis=-1)
        return pc @ cam.world_from_camera[:3, :3].T + cam.world_from_camera[:3, 3]


def subject_mask(depth: DepthImage, cam: CameraRecord,
                 cyl: CaptureCylinder) -> SubjectMask:
    """Mark pixels whose lifted 3D point falls inside the capture cylinder."""
    covered = depth.covered()
    mask = np.zeros_like(covered)
    if covered.any():
        world = lift_depth_image(depth, cam)
        inside = cyl.contains(world.reshape(-1, 3)).reshape(covered.shape)
        mask = covered & inside
    return SubjectMask(mask)
