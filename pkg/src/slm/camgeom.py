"""Pinhole camera model: projection, unprojection and per-pixel rays.

Conventions (fixed for the whole package):

* World frame: right-handed, y-axis up, units in meters.
* Camera frame: x right, y down, z forward along the view direction.
* Pixel (0, 0) addresses the *center* of the top-left pixel.
* Depth is the z coordinate of a point in the camera frame, in meters.

All geometry is float64. Functions accept single points/pixels or stacked
``(N, ...)`` arrays and return matching shapes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class BehindCameraError(ValueError):
    """Raised when a point to be projected has non-positive camera-frame z."""


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixel units."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def matrix(self) -> np.ndarray:
        """3x3 calibration matrix K."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class Ray:
    """Half-line from ``origin`` along unit ``direction``, world frame."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        n = np.linalg.norm(self.direction)
        if abs(n - 1.0) > 1e-9:
            raise ValueError("ray direction must be unit length")

    def at(self, t) -> np.ndarray:
        return self.origin + np.multiply.outer(np.asarray(t), self.direction)


class CameraRecord:
    """One rig camera: intrinsics plus a rigid world-from-camera pose.

    Parameters
    ----------
    cam_id : str
        Identifier, e.g. pole letter + height index ("A3").
    intrinsics : Intrinsics
    world_from_camera : (4, 4) array
        Rigid transform mapping camera-frame points to world-frame points.
        The rotation block must be orthonormal with determinant +1.
    image_path : str
        Path of the image this camera captured, relative to the session root.
    """

    def __init__(self, cam_id: str, intrinsics: Intrinsics,
                 world_from_camera: np.ndarray, image_path: str = ""):
        T = np.asarray(world_from_camera, dtype=np.float64)
        if T.shape != (4, 4):
            raise ValueError("world_from_camera must be 4x4")
        R = T[:3, :3]
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9):
            raise ValueError(f"camera {cam_id}: rotation block is not orthonormal")
        if np.linalg.det(R) < 0:
            raise ValueError(f"camera {cam_id}: rotation determinant must be +1")
        self.id = cam_id
        self.intrinsics = intrinsics
        self.world_from_camera = T
        self.camera_from_world = np.linalg.inv(T)
        self.camera_from_world[:3, :3] = R.T  # exact inverse for the rigid case
        self.camera_from_world[:3, 3] = -R.T @ T[:3, 3]
        self.image_path = image_path

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return self.world_from_camera[:3, 3].copy()

    @property
    def view_axis(self) -> np.ndarray:
        """Unit view direction (camera +z) in world coordinates."""
        return self.world_from_camera[:3, 2].copy()

    def world_to_camera(self, points_world) -> np.ndarray:
        p = np.asarray(points_world, dtype=np.float64)
        return p @ self.camera_from_world[:3, :3].T + self.camera_from_world[:3, 3]

    def camera_to_world(self, points_cam) -> np.ndarray:
        p = np.asarray(points_cam, dtype=np.float64)
        return p @ self.world_from_camera[:3, :3].T + self.world_from_camera[:3, 3]


def intrinsics_from_rig(focal_mm: float, sensor_width_mm: float,
                        width: int, height: int) -> Intrinsics:
    """Convert a physical focal length to pixel intrinsics.

    Square pixels are assumed (fx == fy); the principal point is the image
    center under the pixel-center convention.
    """
    if focal_mm <= 0 or sensor_width_mm <= 0 or width <= 0 or height <= 0:
        raise ValueError("all rig intrinsics parameters must be positive")
    f = focal_mm / sensor_width_mm * width
    return Intrinsics(fx=f, fy=f, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
                      width=int(width), height=int(height))


def project(point_world, cam: CameraRecord):
    """Project world points into the camera.

    Returns ``(pixel, depth)`` where pixel is (x, y) in pixels and depth is
    camera-frame z in meters. Pixels may fall outside the image bounds; the
    caller filters. Raises :class:`BehindCameraError` if any point has z <= 0.
    """
    pc = cam.world_to_camera(point_world)
    z = pc[..., 2]
    if np.any(z <= 0):
        raise BehindCameraError("point behind camera (z <= 0)")
    K = cam.intrinsics
    px = np.stack([K.fx * pc[..., 0] / z + K.cx,
                   K.fy * pc[..., 1] / z + K.cy], axis=-1)
    return px, z


def unproject(pixel, depth, cam: CameraRecord) -> np.ndarray:
    """Lift pixels at given camera-frame depths back to world points.

    Exact right-inverse of :func:`project`.
    """
    px = np.asarray(pixel, dtype=np.float64)
    z = np.asarray(depth, dtype=np.float64)
    if np.any(z <= 0):
        raise ValueError("depth must be positive")
    K = cam.intrinsics
    x = (px[..., 0] - K.cx) / K.fx * z
    y = (px[..., 1] - K.cy) / K.fy * z
    pc = np.stack([x, y, z], axis=-1)
    return cam.camera_to_world(pc)


def pixel_ray(cam: CameraRecord, pixel) -> Ray:
    """World-frame ray through a pixel. Pixels outside the bounds are allowed."""
    px = np.asarray(pixel, dtype=np.float64)
    K = cam.intrinsics
    d_cam = np.array([(px[0] - K.cx) / K.fx, (px[1] - K.cy) / K.fy, 1.0])
    d_world = cam.world_from_camera[:3, :3] @ d_cam
    d_world /= np.linalg.norm(d_world)
    return Ray(origin=cam.center, direction=d_world)


def look_at(position, target, world_up=(0.0, 1.0, 0.0)) -> np.ndarray:
    """World-from-camera pose for a camera at ``position`` looking at ``target``.

    The camera's x axis is kept horizontal with respect to ``world_up``;
    degenerate (view parallel to up) configurations raise.
    """
    pos = np.asarray(position, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - pos
    n = np.linalg.norm(fwd)
    if n == 0:
        raise ValueError("camera position and target coincide")
    z = fwd / n
    down = -np.asarray(world_up, dtype=np.float64)
    x = np.cross(down, z)
    nx = np.linalg.norm(x)
    if nx < 1e-12:
        raise ValueError("view direction parallel to world up")
    x /= nx
    y = np.cross(z, x)
    T = np.eye(4)
    T[:3, 0], T[:3, 1], T[:3, 2], T[:3, 3] = x, y, z, pos
    return T


def save_cameras(cams: list[CameraRecord], path) -> None:
    """Write a camera file (JSON array; meters and pixels)."""
    records = []
    for c in cams:
        K = c.intrinsics
        records.append({
            "id": c.id,
            "width": K.width, "height": K.height,
            "fx": K.fx, "fy": K.fy, "cx": K.cx, "cy": K.cy,
            "world_from_camera": [float(v) for v in c.world_from_camera.reshape(-1)],
            "image": c.image_path,
        })
    Path(path).write_text(json.dumps(records, indent=1, sort_keys=True))


def load_cameras(path) -> list[CameraRecord]:
    """Read a camera file written by :func:`save_cameras`."""
    records = json.loads(Path(path).read_text())
    cams = []
    for r in records:
        K = Intrinsics(fx=r["fx"], fy=r["fy"], cx=r["cx"], cy=r["cy"],
                       width=r["width"], height=r["height"])
        T = np.array(r["world_from_camera"], dtype=np.float64).reshape(4, 4)
        cams.append(CameraRecord(r["id"], K, T, r.get("image", "")))
    return cams
