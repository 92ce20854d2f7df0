"""Longitudinal lesion tracking across scans of the same subject.

Consumes externally produced vertex correspondences between two scan
meshes, snaps lesions to vertices, measures edge-graph geodesics with
Dijkstra's algorithm and solves a one-to-one optimal assignment between
the two registries.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import fileio
from .fuse3d import GlobalLesion
from .meshops import TriMesh

MAX_GEODESIC = 0.05  # meters; larger residuals indicate registration failure


@dataclass(frozen=True)
class CorrespondenceMap:
    """Vertex-level anatomical correspondence from mesh A to mesh B.

    ``pairs[i]`` is the vertex index in B corresponding to vertex i of A.
    """

    mesh_a_id: str
    mesh_b_id: str
    pairs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pairs",
                           np.asarray(self.pairs, dtype=np.int64))

    def save(self, path) -> None:
        fileio.write_json_atomic(path, {
            "mesh_a_id": self.mesh_a_id, "mesh_b_id": self.mesh_b_id,
            "pairs": [int(v) for v in self.pairs]})

    @classmethod
    def load(cls, path) -> "CorrespondenceMap":
        doc = fileio.read_json(path)
        return cls(doc["mesh_a_id"], doc["mesh_b_id"], doc["pairs"])

    @classmethod
    def identity(cls, n: int, mesh_a_id: str = "a",
                 mesh_b_id: str = "b") -> "CorrespondenceMap":
        return cls(mesh_a_id, mesh_b_id, np.arange(n))


@dataclass
class LesionMatch:
    """Pairing of a lesion in scan t with one in scan t+1."""

    lesion_t: int
    lesion_t1: int
    geodesic_residual: float
    matched: bool

    def to_json(self) -> dict:
        residual = self.geodesic_residual
        return {"lesion_t": self.lesion_t, "lesion_t1": self.lesion_t1,
                "geodesic_residual": residual if np.isfinite(residual) else None,
                "matched": self.matched}


def snap_to_vertex(point, mesh: TriMesh) -> int:
    """Index of the Euclidean-nearest mesh vertex; ties to the lowest index."""
    if len(mesh) == 0:
        raise ValueError("cannot snap to an empty mesh")
    d2 = ((mesh.vertices - np.asarray(point, dtype=np.float64)) ** 2).sum(axis=1)
    return int(np.argmin(d2))


def edge_graph(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """CSR adjacency of the mesh edge graph with Euclidean edge weights.

    Cached on the mesh; returns (indptr, indices, weights).
    """
    cached = getattr(mesh, "_edge_graph", None)
    if cached is not None:
        return cached
    f = mesh.faces
    pairs = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    pairs = np.concatenate([pairs, pairs[:, ::-1]])
    pairs = np.unique(pairs, axis=0)
    w = np.linalg.norm(mesh.vertices[pairs[:, 0]] - mesh.vertices[pairs[:, 1]],
                       axis=1)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    pairs, w = pairs[order], w[order]
    indptr = np.zeros(len(mesh) + 1, dtype=np.int64)
    np.add.at(indptr, pairs[:, 0] + 1, 1)
    indptr = np.cumsum(indptr)
    graph = (indptr, pairs[:, 1].copy(), w)
    mesh._edge_graph = graph
    return graph


def geodesic(mesh: TriMesh, source: int, targets=None) -> np.ndarray:
    """Shortest edge-path lengths from ``source`` (Dijkstra).

    Returns distances to ``targets`` (in their given order) or to every
    vertex when ``targets`` is None. Vertices in a different connected
    component come back +inf.
    """
    n = len(mesh)
    if not 0 <= source < n:
        raise ValueError(f"source vertex {source} out of range")
    target_list = None
    if targets is not None:
        target_list = [int(t) for t in targets]
        for t in target_list:
            if not 0 <= t < n:
                raise ValueError(f"target vertex {t} out of range")
    indptr, indices, weights = edge_graph(mesh)
    dist = np.full(n, np.inf)
    dist[source] = 0.0
    visited = np.zeros(n, dtype=bool)
    remaining = set(target_list) if target_list is not None else None
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if visited[u]:
            continue
        visited[u] = True
        if remaining is not None:
            remaining.discard(u)
            if not remaining:
                break
        for k in range(indptr[u], indptr[u + 1]):
            v = indices[k]
            nd = d + weights[k]
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    if target_list is None:
        return dist
    return dist[target_list]


def transfer(vertex_in_a: int, corr: CorrespondenceMap) -> int:
    """Map a vertex of mesh A to its anatomical counterpart in mesh B."""
    if not 0 <= vertex_in_a < len(corr.pairs):
        raise ValueError(f"vertex {vertex_in_a} outside correspondence domain")
    return int(corr.pairs[vertex_in_a])


def match_lesions(lesions_t: list[GlobalLesion], lesions_t1: list[GlobalLesion],
                  corr: CorrespondenceMap, mesh_t1: TriMesh,
                  max_geodesic: float = MAX_GEODESIC) -> list[LesionMatch]:
    """One-to-one lesion pairing across scans by minimal total geodesic cost.

    Each scan-t lesion's vertex is transferred through the correspondence
    into mesh t+1; geodesic distances to every scan-t+1 lesion vertex form
    the assignment costs. Pairs whose residual exceeds ``max_geodesic`` are
    reported with matched=False rather than silently accepted.
    """
    if not lesions_t or not lesions_t1:
        return []
    targets = [l.nearest_vertex for l in lesions_t1]
    cost = np.empty((len(lesions_t), len(lesions_t1)))
    for r, les in enumerate(lesions_t):
        v_b = transfer(les.nearest_vertex, corr)
        cost[r] = geodesic(mesh_t1, v_b, targets)
    # optimal assignment; +inf (disconnected) handled via a large finite cost
    big = 1e9
    finite = np.where(np.isfinite(cost), cost, big)
    rows, cols = linear_sum_assignment(finite)
    matches = []
    for r, c in zip(rows, cols):
        residual = float(cost[r, c])
        matches.append(LesionMatch(
            lesion_t=lesions_t[r].global_id,
            lesion_t1=lesions_t1[c].global_id,
            geodesic_residual=residual,
            matched=bool(np.isfinite(residual) and residual <= max_geodesic)))
    matches.sort(key=lambda m: m.lesion_t)
    return matches


def longitudinal_accuracy(predicted, ground_truth) -> float:
    """Fraction of ground-truth lesion pairs the tracker got right.

    Both arguments are iterables of LesionMatch or (id_t, id_t1) pairs;
    predicted pairs flagged unmatched are ignored.
    """
    def as_pairs(items, keep_unmatched):
        pairs = set()
        for it in items:
            if isinstance(it, LesionMatch):
                if keep_unmatched or it.matched:
                    pairs.add((it.lesion_t, it.lesion_t1))
            else:
                a, b = it
                pairs.add((a, b))
        return pairs

    gt = as_pairs(ground_truth, keep_unmatched=True)
    if not gt:
        raise ValueError("longitudinal accuracy undefined without ground truth")
    pred = as_pairs(predicted, keep_unmatched=False)
    return len(pred & gt) / len(gt)


def save_tracks(path, matches: list[LesionMatch],
                accuracy: float | None = None) -> None:
    doc = {"pairs": [m.to_json() for m in matches]}
    if accuracy is not None:
        doc["accuracy"] = accuracy
    fileio.write_json_atomic(path, doc)


def load_tracks(path) -> list[LesionMatch]:
    doc = fileio.read_json(path)
    return [LesionMatch(p["lesion_t"], p["lesion_t1"],
                        np.inf if p["geodesic_residual"] is None
                        else p["geodesic_residual"], p["matched"])
            for p in doc["pairs"]]
