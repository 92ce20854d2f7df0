"""Triangle meshes, point-cloud fits and mesh-to-mesh validation.

Covers ingestion (OBJ + texture, ASCII PLY clouds), the canonicalization
that puts a reconstructed body at the world origin in physical scale
(ground plane fit, stand circle fit, rigid+scale transform, crop), and
sampled Hausdorff distances for validating reconstructions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fileio
from ._kernels import build_bvh, bvh_point_distances


class FitError(ValueError):
    """Raised when a robust fit has no valid solution (degenerate input)."""


@dataclass(frozen=True)
class Plane:
    """Plane {x : normal . x = offset} with unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("plane normal must be unit length")
        object.__setattr__(self, "normal", n)

    def signed_distance(self, points) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.normal - self.offset

    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        """Two orthonormal in-plane directions."""
        n = self.normal
        seed = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        u = np.cross(n, seed)
        u /= np.linalg.norm(u)
        return u, np.cross(n, u)


@dataclass(frozen=True)
class Circle3D:
    """Circle of given center/radius lying in ``plane``."""

    center: np.ndarray
    radius: float
    plane: Plane

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("circle radius must be positive")
        c = np.asarray(self.center, dtype=np.float64)
        if abs(self.plane.signed_distance(c)) > 1e-6:
            raise ValueError("circle center must lie on its plane")
        object.__setattr__(self, "center", c)


class TriMesh:
    """Triangle mesh with optional per-corner UVs and a single texture.

    Parameters
    ----------
    vertices : (N, 3) float64, meters
    faces : (M, 3) int vertex indices
    uvs : (M, 3, 2) float64 in [0, 1], top-left texture origin, or None
    texture : (th, tw, 3) uint8 or None

    Vertex normals are area-weighted averages of incident face normals,
    computed on first access and cached.
    """

    def __init__(self, vertices, faces, uvs=None, texture=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64).reshape(-1, 3)
        if self.faces.size:
            if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
                raise ValueError("face index out of range")
            degenerate = (
                (self.faces[:, 0] == self.faces[:, 1])
                | (self.faces[:, 1] == self.faces[:, 2])
                | (self.faces[:, 0] == self.faces[:, 2])
            )
            if degenerate.any():
                raise ValueError("faces with repeated vertices are not allowed")
        self.uvs = None if uvs is None else np.asarray(uvs, dtype=np.float64).reshape(-1, 3, 2)
        if self.uvs is not None and len(self.uvs) != len(self.faces):
            raise ValueError("uvs must be per face corner")
        self.texture = None if texture is None else np.asarray(texture, dtype=np.uint8)
        self._vertex_normals = None
        self._bvh = None

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def triangles(self) -> np.ndarray:
        """Corner positions, shape (M, 3, 3)."""
        return self.vertices[self.faces]

    def face_normals_areas(self) -> tuple[np.ndarray, np.ndarray]:
        tri = self.triangles()
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        norm = np.linalg.norm(cross, axis=1)
        normals = np.zeros_like(cross)
        ok = norm > 0
        normals[ok] = cross[ok] / norm[ok, None]
        return normals, norm * 0.5

    @property
    def vertex_normals(self) -> np.ndarray:
        if self._vertex_normals is None:
            fn, areas = self.face_normals_areas()
            acc = np.zeros_like(self.vertices)
            weighted = fn * areas[:, None]
            for k in range(3):
                np.add.at(acc, self.faces[:, k], weighted)
            norm = np.linalg.norm(acc, axis=1)
            acc[norm == 0] = (0.0, 0.0, 1.0)
            norm[norm == 0] = 1.0
            self._vertex_normals = acc / norm[:, None]
        return self._vertex_normals

    def surface_area(self) -> float:
        return float(self.face_normals_areas()[1].sum())

    def bvh(self):
        if self._bvh is None:
            self._bvh = build_bvh(self.triangles())
        return self._bvh

    def save(self, path) -> None:
        fileio.write_obj(path, self.vertices, self.faces, self.uvs, self.texture)

    @classmethod
    def load(cls, path) -> "TriMesh":
        vertices, faces, uvs, texture = fileio.read_obj(path)
        return cls(vertices, faces, uvs, texture)


# ------------------------------------------------------------------ fitting

RANSAC_ITERATIONS = 1024


def _plane_from_3(p0, p1, p2):
    n = np.cross(p1 - p0, p2 - p0)
    norm = np.linalg.norm(n)
    if norm < 1e-12:
        return None
    n = n / norm
    return n, float(n @ p0)


def _lsq_plane(points: np.ndarray) -> Plane:
    centroid = points.mean(axis=0)
    cov = np.cov((points - centroid).T)
    _, vecs = np.linalg.eigh(cov)
    n = vecs[:, 0]
    n = n / np.linalg.norm(n)
    return Plane(normal=n, offset=float(n @ centroid))


def fit_ground_plane(points, inlier_tol: float,
                     iterations: int = RANSAC_ITERATIONS,
                     seed: int = 0) -> Plane:
    """RANSAC plane fit with a least-squares refit of the consensus set.

    The normal is oriented so the majority of points (the body) lie on the
    positive side.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 3:
        raise FitError("plane fit needs at least 3 points")
    rng = np.random.default_rng(seed)
    best_count, best_inliers = -1, None
    for _ in range(iterations):
        i, j, k = rng.choice(len(pts), size=3, replace=False)
        hyp = _plane_from_3(pts[i], pts[j], pts[k])
        if hyp is None:
            continue
        n, off = hyp
        inliers = np.abs(pts @ n - off) <= inlier_tol
        count = int(inliers.sum())
        if count > best_count:
            best_count, best_inliers = count, inliers
    if best_inliers is None or best_count < 3:
        raise FitError("plane fit found no non-collinear sample")
    plane = _lsq_plane(pts[best_inliers])
    d = plane.signed_distance(pts)
    above = int((d > 1e-12).sum())
    below = int((d < -1e-12).sum())
    flip = below > above
    if above == below:  # all points on the plane: canonical sign
        flip = plane.normal[np.argmax(np.abs(plane.normal))] < 0
    if flip:
        plane = Plane(normal=-plane.normal, offset=-plane.offset)
    return plane


def _kasa_circle(xy: np.ndarray) -> tuple[np.ndarray, float]:
    """Algebraic least-squares circle (Kasa fit) on 2D points."""
    A = np.column_stack([2.0 * xy, np.ones(len(xy))])
    b = (xy ** 2).sum(axis=1)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    center = sol[:2]
    r2 = sol[2] + center @ center
    if r2 <= 0:
        raise FitError("circle fit degenerated to non-positive radius")
    return center, float(np.sqrt(r2))


def _circumcircle(p0, p1, p2):
    ax, ay = p0
    bx, by = p1
    cx, cy = p2
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if abs(d) < 1e-12:
        return None
    ux = ((ax**2 + ay**2) * (by - cy) + (bx**2 + by**2) * (cy - ay)
          + (cx**2 + cy**2) * (ay - by)) / d
    uy = ((ax**2 + ay**2) * (cx - bx) + (bx**2 + by**2) * (ax - cx)
          + (cx**2 + cy**2) * (bx - ax)) / d
    center = np.array([ux, uy])
    return center, float(np.linalg.norm(p0 - center))


def fit_stand_circle(points, ground: Plane, band: float,
                     iterations: int = RANSAC_ITERATIONS,
                     seed: int = 0) -> Circle3D:
    """Fit the platform rim circle from points near the ground plane.

    Near-ground points (within ``band`` of the plane) are projected onto the
    plane; a RANSAC circumcircle search (inlier tolerance band/2) is refined
    with a Kasa fit over the consensus set.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    near = pts[np.abs(ground.signed_distance(pts)) <= band]
    if len(near) < 3:
        raise FitError("circle fit needs at least 3 near-ground points")
    u, v = ground.basis()
    origin = ground.normal * ground.offset
    flat = near - origin
    xy = np.column_stack([flat @ u, flat @ v])
    rng = np.random.default_rng(seed)
    tol = band / 2.0
    best_count, best_inliers = -1, None
    for _ in range(iterations):
        i, j, k = rng.choice(len(xy), size=3, replace=False)
        hyp = _circumcircle(xy[i], xy[j], xy[k])
        if hyp is None:
            continue
        center, radius = hyp
        inliers = np.abs(np.linalg.norm(xy - center, axis=1) - radius) <= tol
        count = int(inliers.sum())
        if count > best_count:
            best_count, best_inliers = count, inliers
    if best_inliers is None or best_count < 3:
        raise FitError("circle fit found no non-collinear sample")
    center2d, radius = _kasa_circle(xy[best_inliers])
    center3d = origin + center2d[0] * u + center2d[1] * v
    return Circle3D(center=center3d, radius=radius, plane=ground)


# ------------------------------------------------------------ canonical pose

def rotation_to_y(normal: np.ndarray) -> np.ndarray:
    """Minimal rotation taking ``normal`` to +y (Rodrigues)."""
    n = np.asarray(normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    y = np.array([0.0, 1.0, 0.0])
    c = float(n @ y)
    axis = np.cross(n, y)
    s = np.linalg.norm(axis)
    if s < 1e-12:
        if c > 0:
            return np.eye(3)
        return np.diag([1.0, -1.0, -1.0])  # 180 degrees about x
    axis = axis / s
    K = np.array([[0, -axis[2], axis[1]],
                  [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    return np.eye(3) + s * K + (1 - c) * (K @ K)


def canonical_transform(ground: Plane, stand: Circle3D,
                        stand_diameter_m: float) -> tuple[np.ndarray, float]:
    """Similarity transform (4x4, plus scale) mapping the reconstruction
    frame to the canonical frame: stand center at origin, ground normal +y,
    physical scale from the known stand diameter."""
    if stand.radius <= 0:
        raise ValueError("stand radius must be positive")
    scale = stand_diameter_m / (2.0 * stand.radius)
    R = rotation_to_y(ground.normal)
    T = np.eye(4)
    T[:3, :3] = scale * R
    T[:3, 3] = -scale * (R @ stand.center)
    return T, scale


def canonicalize(mesh: TriMesh, ground: Plane, stand: Circle3D,
                 stand_diameter_m: float, crop_radius: float = 0.8,
                 crop_y_max: float = 2.2) -> TriMesh:
    """Move a reconstructed body into the canonical frame and crop clutter.

    Vertices below the ground (y < 0, platform remnants) or outside the
    capture cylinder are removed together with their faces.
    """
    T, scale = canonical_transform(ground, stand, stand_diameter_m)
    v = mesh.vertices @ T[:3, :3].T + T[:3, 3]
    inside = (
        (v[:, 1] >= -1e-9)
        & (v[:, 1] <= crop_y_max)
        & (np.hypot(v[:, 0], v[:, 2]) <= crop_radius)
    )
    face_ok = inside[mesh.faces].all(axis=1)
    keep = np.zeros(len(v), dtype=bool)  # also drops now-unreferenced vertices
    keep[mesh.faces[face_ok]] = True
    new_index = np.cumsum(keep) - 1
    faces = new_index[mesh.faces[face_ok]]
    uvs = None if mesh.uvs is None else mesh.uvs[face_ok]
    return TriMesh(v[keep], faces, uvs, mesh.texture)


def canonicalize_reconstruction(mesh: TriMesh, cloud=None,
                                stand_diameter_m: float = 0.6,
                                inlier_tol: float = 0.01, band: float = 0.03,
                                iterations: int = RANSAC_ITERATIONS,
                                seed: int = 0,
                                crop_radius: float = 0.8,
                                crop_y_max: float = 2.2) -> tuple[TriMesh, dict]:
    """Full post-processing of a raw reconstruction: fit, transform, crop.

    Fits the ground plane and stand circle on ``cloud`` (the SfM point cloud
    when available, else the mesh vertices), moves the body into the
    canonical frame at physical scale and returns the cropped mesh together
    with a metadata dict (transform, scale, fit residuals, seed) ready to be
    written as the output's JSON sidecar.
    """
    pts = np.asarray(cloud, dtype=np.float64).reshape(-1, 3) \
        if cloud is not None else mesh.vertices
    ground = fit_ground_plane(pts, inlier_tol, iterations, seed)
    stand = fit_stand_circle(pts, ground, band, iterations, seed + 1)
    T, scale = canonical_transform(ground, stand, stand_diameter_m)
    out = canonicalize(mesh, ground, stand, stand_diameter_m,
                       crop_radius=crop_radius, crop_y_max=crop_y_max)

    d_plane = ground.signed_distance(pts)
    plane_in = np.abs(d_plane) <= inlier_tol
    near = pts[np.abs(d_plane) <= band]
    ring = np.abs(np.linalg.norm(
        (near - stand.center) - np.outer(ground.signed_distance(near),
                                         ground.normal), axis=1) - stand.radius)
    circle_in = ring <= band / 2
    info = {
        "transform": [float(v) for v in T.reshape(-1)],
        "scale": scale,
        "stand_diameter_m": stand_diameter_m,
        "fit_residuals": {
            "plane_rms_m": float(np.sqrt(np.mean(d_plane[plane_in] ** 2)))
            if plane_in.any() else None,
            "plane_inliers": int(plane_in.sum()),
            "circle_rms_m": float(np.sqrt(np.mean(ring[circle_in] ** 2)))
            if circle_in.any() else None,
            "circle_inliers": int(circle_in.sum()),
            "stand_radius_fitted": stand.radius,
        },
        "seed": seed,
    }
    return out, info


def save_canonical_mesh(mesh: TriMesh, path, info: dict) -> None:
    """Write an OBJ (+MTL/texture) with its JSON metadata sidecar."""
    from pathlib import Path

    mesh.save(path)
    fileio.write_json_atomic(Path(path).with_suffix(".json"), info)


# ------------------------------------------------------------- validation

def sample_surface(mesh: TriMesh, n_samples: int, seed: int = 0) -> np.ndarray:
    """Uniform-area random samples on the mesh surface, shape (n, 3)."""
    if mesh.n_faces == 0:
        raise ValueError("cannot sample an empty mesh")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    _, areas = mesh.face_normals_areas()
    rng = np.random.default_rng(seed)
    total = areas.sum()
    if total <= 0:
        raise ValueError("mesh has zero surface area")
    face_idx = rng.choice(mesh.n_faces, size=n_samples, p=areas / total)
    r1 = np.sqrt(rng.random(n_samples))
    r2 = rng.random(n_samples)
    tri = mesh.triangles()[face_idx]
    return ((1 - r1)[:, None] * tri[:, 0]
            + (r1 * (1 - r2))[:, None] * tri[:, 1]
            + (r1 * r2)[:, None] * tri[:, 2])


def point_mesh_distances(points, mesh: TriMesh) -> np.ndarray:
    """Exact distances from points to the closest mesh triangle (BVH)."""
    if mesh.n_faces == 0:
        raise ValueError("cannot measure distance to an empty mesh")
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    b = mesh.bvh()
    return bvh_point_distances(
        pts, mesh.triangles(), b["node_min"], b["node_max"], b["node_left"],
        b["node_right"], b["node_start"], b["node_count"], b["leaf_tris"])


def hausdorff(mesh_a: TriMesh, mesh_b: TriMesh, n_samples: int = 100_000,
              seed: int = 0, symmetric: bool = False) -> dict:
    """Sampled one-sided Hausdorff distance from mesh_a to mesh_b.

    Uniform-area samples on A are measured to the exact nearest point of B.
    With ``symmetric=True`` both directions are computed and max/mean are the
    maxima of the two one-sided values.
    """
    if mesh_a.n_faces == 0 or mesh_b.n_faces == 0:
        raise ValueError("hausdorff needs two non-empty meshes")
    d_ab = point_mesh_distances(sample_surface(mesh_a, n_samples, seed), mesh_b)
    result = {"max": float(d_ab.max()), "mean": float(d_ab.mean()),
              "per_sample": d_ab}
    if symmetric:
        d_ba = point_mesh_distances(sample_surface(mesh_b, n_samples, seed + 1),
                                    mesh_a)
        result["max"] = max(result["max"], float(d_ba.max()))
        result["mean"] = max(result["mean"], float(d_ba.mean()))
        result["per_sample_reverse"] = d_ba
    return result
