"""Lift 2D detections to 3D, fuse multi-view sightings into unique lesions.

Each detection's box center is unprojected through the per-camera depth
image; sightings are grouped by average-linkage agglomeration with a
distance cutoff, small clusters are rejected as outliers, and the survivors
become the global lesion registry with deterministic ids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fileio
from .camgeom import CameraRecord, unproject
from .detect import Detection2D
from .meshops import TriMesh
from .render import DepthImage, SubjectMask

DISTANCE_THRESHOLD = 0.02  # meters between sightings of one lesion
MIN_CLUSTER_SIZE = 3


@dataclass(frozen=True)
class Sighting3D:
    """One detection lifted into world space."""

    image_id: str
    det_id: int
    point: np.ndarray
    lift_status: str  # center_hit | fallback_hit

    def __post_init__(self):
        object.__setattr__(self, "point",
                           np.asarray(self.point, dtype=np.float64))


@dataclass
class GlobalLesion:
    """One physical lesion aggregated from multi-view sightings."""

    global_id: int
    centroid: np.ndarray
    normal: np.ndarray
    nearest_vertex: int
    members: list  # of (image_id, det_id)

    def to_json(self) -> dict:
        return {
            "global_id": self.global_id,
            "centroid": [float(v) for v in self.centroid],
            "normal": [float(v) for v in self.normal],
            "nearest_vertex": self.nearest_vertex,
            "members": [{"image_id": i, "det_id": d} for i, d in self.members],
        }


def lift(det: Detection2D, depth: DepthImage, mask: SubjectMask,
         cam: CameraRecord) -> Sighting3D | None:
    """Unproject a detection's center through the depth image.

    Uses the box center pixel when it is on the subject (center_hit);
    otherwise the masked box-interior pixel nearest to the center
    (fallback_hit, ties to smaller y then x). Boxes with no masked pixel
    yield None: the detection is off-subject.
    """
    x, y, w, h = det.bbox
    cx = int(round(x + (w - 1.0) / 2.0))
    cy = int(round(y + (h - 1.0) / 2.0))
    width, height = mask.width, mask.height
    cx, cy = min(max(cx, 0), width - 1), min(max(cy, 0), height - 1)
    if mask.values[cy, cx]:
        point = unproject((cx, cy), float(depth.values[cy, cx]), cam)
        return Sighting3D(det.image_id, det.det_id, point, "center_hit")

    x0 = min(max(int(np.floor(x)), 0), width - 1)
    y0 = min(max(int(np.floor(y)), 0), height - 1)
    x1 = min(max(int(np.ceil(x + w - 1)), 0), width - 1)
    y1 = min(max(int(np.ceil(y + h - 1)), 0), height - 1)
    sub = mask.values[y0:y1 + 1, x0:x1 + 1]
    ys, xs = np.nonzero(sub)
    if len(xs) == 0:
        return None
    d2 = (xs + x0 - cx) ** 2 + (ys + y0 - cy) ** 2
    k = np.lexsort((xs, ys, d2))[0]  # nearest, ties by smaller y then x
    px, py = int(xs[k] + x0), int(ys[k] + y0)
    point = unproject((px, py), float(depth.values[py, px]), cam)
    return Sighting3D(det.image_id, det.det_id, point, "fallback_hit")


def cluster(points, distance_threshold: float = DISTANCE_THRESHOLD,
            min_cluster_size: int = MIN_CLUSTER_SIZE
            ) -> tuple[list[list[int]], list[list[int]]]:
    """Average-linkage agglomeration with a distance cutoff.

    Merging proceeds bottom-up over Euclidean distances and stops when the
    smallest inter-cluster average linkage exceeds ``distance_threshold``.
    Returns (clusters, rejected): member-index lists, where clusters smaller
    than ``min_cluster_size`` land in the rejected list. Merge order is
    deterministic (first minimal pair in index order).
    """
    if distance_threshold <= 0:
        raise ValueError("distance threshold must be positive")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(pts)
    if n == 0:
        return [], []
    members: list[list[int]] = [[i] for i in range(n)]
    diff = pts[:, None, :] - pts[None, :, :]
    D = np.sqrt((diff * diff).sum(axis=2))
    np.fill_diagonal(D, np.inf)
    sizes = np.ones(n)
    while len(members) > 1:
        flat = np.argmin(D)
        i, j = divmod(int(flat), len(members))
        if i > j:
            i, j = j, i
        if D[i, j] > distance_threshold:
            break
        # Lance-Williams average-linkage update into row/col i
        ni, nj = sizes[i], sizes[j]
        newrow = (ni * D[i] + nj * D[j]) / (ni + nj)
        D[i, :] = newrow
        D[:, i] = newrow
        D[i, i] = np.inf
        D = np.delete(np.delete(D, j, axis=0), j, axis=1)
        sizes[i] += sizes[j]
        sizes = np.delete(sizes, j)
        members[i] = members[i] + members[j]
        del members[j]
    kept = [sorted(m) for m in members if len(m) >= min_cluster_size]
    rejected = [sorted(m) for m in members if len(m) < min_cluster_size]
    return kept, rejected


def build_registry(clusters: list[list[Sighting3D]],
                   mesh: TriMesh) -> list[GlobalLesion]:
    """Turn sighting clusters into the global lesion registry.

    Centroid is the arithmetic mean of member points; the surface normal is
    taken at the nearest mesh vertex. Ids are assigned in a deterministic
    order (centroid height, then azimuth around +y) starting at 1.
    """
    from .track import snap_to_vertex

    entries = []
    for group in clusters:
        centroid = np.mean([s.point for s in group], axis=0)
        azimuth = float(np.arctan2(centroid[2], centroid[0]))
        entries.append((float(centroid[1]), azimuth, centroid, group))
    entries.sort(key=lambda e: (e[0], e[1]))
    registry = []
    for gid, (_, _, centroid, group) in enumerate(entries, start=1):
        vi = snap_to_vertex(centroid, mesh)
        registry.append(GlobalLesion(
            global_id=gid, centroid=centroid,
            normal=mesh.vertex_normals[vi].copy(), nearest_vertex=int(vi),
            members=[(s.image_id, s.det_id) for s in group]))
    return registry


def fuse_sightings(sightings: list[Sighting3D], mesh: TriMesh,
                   distance_threshold: float = DISTANCE_THRESHOLD,
                   min_cluster_size: int = MIN_CLUSTER_SIZE):
    """Cluster sightings and build the registry; returns (registry, rejected).

    ``rejected`` holds the outlier clusters (fewer than ``min_cluster_size``
    members) as sighting lists.
    """
    if not sightings:
        return [], []
    pts = np.stack([s.point for s in sightings])
    kept_idx, rejected_idx = cluster(pts, distance_threshold, min_cluster_size)
    registry = build_registry([[sightings[i] for i in grp] for grp in kept_idx],
                              mesh)
    rejected = [[sightings[i] for i in grp] for grp in rejected_idx]
    return registry, rejected


def registry_to_json(registry: list[GlobalLesion],
                     rejected: list[list[Sighting3D]],
                     off_subject: list[tuple] | None = None) -> dict:
    doc = {
        "lesions": [l.to_json() for l in registry],
        "rejected": [
            {
                "centroid": [float(v) for v in np.mean([s.point for s in grp], axis=0)],
                "members": [{"image_id": s.image_id, "det_id": s.det_id}
                            for s in grp],
            }
            for grp in rejected
        ],
    }
    if off_subject is not None:
        doc["off_subject"] = [{"image_id": i, "det_id": d}
                              for i, d in off_subject]
    return doc


def save_registry(path, registry, rejected, off_subject=None) -> None:
    fileio.write_json_atomic(path,
                             registry_to_json(registry, rejected, off_subject))


def load_registry(path) -> list[GlobalLesion]:
    doc = fileio.read_json(path)
    return [
        GlobalLesion(
            global_id=o["global_id"],
            centroid=np.array(o["centroid"], dtype=np.float64),
            normal=np.array(o["normal"], dtype=np.float64),
            nearest_vertex=o["nearest_vertex"],
            members=[(m["image_id"], m["det_id"]) for m in o["members"]],
        )
        for o in doc["lesions"]
    ]
