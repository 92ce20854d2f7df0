"""Numba kernels for the hot paths: triangle rasterization and BVH queries.

Everything here works on flat float64/float32/int64 arrays so the jitted
functions stay cache-friendly and re-usable across meshes.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def raster_fill(px, pz, puv, has_uv, texture, depth, color, bg, znear):
    """Z-buffered scanline fill of projected triangles.

    px : (M, 3, 2) float64   projected pixel coordinates per corner
    pz : (M, 3) float64      camera-frame z per corner (depth)
    puv : (M, 3, 2) float64  texture coordinates per corner (ignored if !has_uv)
    texture : (th, tw, 3) uint8
    depth : (H, W) float32   in/out, background = +inf
    color : (H, W, 3) uint8  in/out
    bg : (3,) uint8          flat color used when no texture is present
    znear : float            triangles with any corner at z <= znear are skipped
    """
    height, width = depth.shape
    th, tw = texture.shape[0], texture.shape[1]
    for t in range(px.shape[0]):
        z0, z1, z2 = pz[t, 0], pz[t, 1], pz[t, 2]
        if z0 <= znear or z1 <= znear or z2 <= znear:
            continue
        x0, y0 = px[t, 0, 0], px[t, 0, 1]
        x1, y1 = px[t, 1, 0], px[t, 1, 1]
        x2, y2 = px[t, 2, 0], px[t, 2, 1]
        area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if area == 0.0:
            continue
        xmin = max(int(np.ceil(min(x0, min(x1, x2)))), 0)
        xmax = min(int(np.floor(max(x0, max(x1, x2)))), width - 1)
        ymin = max(int(np.ceil(min(y0, min(y1, y2)))), 0)
        ymax = min(int(np.floor(max(y0, max(y1, y2)))), height - 1)
        if xmin > xmax or ymin > ymax:
            continue
        inv_area = 1.0 / area
        iz0, iz1, iz2 = 1.0 / z0, 1.0 / z1, 1.0 / z2
        u0 = puv[t, 0, 0] * iz0
        v0 = puv[t, 0, 1] * iz0
        u1 = puv[t, 1, 0] * iz1
        v1 = puv[t, 1, 1] * iz1
        u2 = puv[t, 2, 0] * iz2
        v2 = puv[t, 2, 1] * iz2
        for yy in range(ymin, ymax + 1):
            fy = float(yy)
            for xx in range(xmin, xmax + 1):
                fx = float(xx)
                w0 = ((x1 - fx) * (y2 - fy) - (x2 - fx) * (y1 - fy)) * inv_area
                w1 = ((x2 - fx) * (y0 - fy) - (x0 - fx) * (y2 - fy)) * inv_area
                w2 = 1.0 - w0 - w1
                # inclusive edges, both windings (no back-face culling)
                if w0 < 0.0 or w1 < 0.0 or w2 < 0.0:
                    continue
                inv_z = w0 * iz0 + w1 * iz1 + w2 * iz2
                z = 1.0 / inv_z
                if z < depth[yy, xx]:
                    depth[yy, xx] = np.float32(z)
                    if has_uv:
                        u = (w0 * u0 + w1 * u1 + w2 * u2) * z
                        v = (w0 * v0 + w1 * v1 + w2 * v2) * z
                        ti = int(v * th)
                        tj = int(u * tw)
                        if ti < 0:
                            ti = 0
                        elif ti >= th:
                            ti = th - 1
                        if tj < 0:
                            tj = 0
                        elif tj >= tw:
                            tj = tw - 1
                        color[yy, xx, 0] = texture[ti, tj, 0]
                        color[yy, xx, 1] = texture[ti, tj, 1]
                        color[yy, xx, 2] = texture[ti, tj, 2]
                    else:
                        color[yy, xx, 0] = bg[0]
                        color[yy, xx, 1] = bg[1]
                        color[yy, xx, 2] = bg[2]


@njit(cache=True, inline="always")
def _tri_closest_dist2(p, a, b, c):
    """Squared distance from point p to triangle abc (Ericson's method)."""
    abx, aby, abz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    acx, acy, acz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    apx, apy, apz = p[0] - a[0], p[1] - a[1], p[2] - a[2]
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return apx * apx + apy * apy + apz * apz
    bpx, bpy, bpz = p[0] - b[0], p[1] - b[1], p[2] - b[2]
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bpx * bpx + bpy * bpy + bpz * bpz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        t = d1 / (d1 - d3)
        qx, qy, qz = apx - t * abx, apy - t * aby, apz - t * abz
        return qx * qx + qy * qy + qz * qz
    cpx, cpy, cpz = p[0] - c[0], p[1] - c[1], p[2] - c[2]
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cpx * cpx + cpy * cpy + cpz * cpz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        t = d2 / (d2 - d6)
        qx, qy, qz = apx - t * acx, apy - t * acy, apz - t * acz
        return qx * qx + qy * qy + qz * qz
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        t = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        qx = bpx - t * (c[0] - b[0])
        qy = bpy - t * (c[1] - b[1])
        qz = bpz - t * (c[2] - b[2])
        return qx * qx + qy * qy + qz * qz
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    qx = apx - (abx * v + acx * w)
    qy = apy - (aby * v + acy * w)
    qz = apz - (abz * v + acz * w)
    return qx * qx + qy * qy + qz * qz


@njit(cache=True, inline="always")
def _box_dist2(p, bmin, bmax):
    d2 = 0.0
    for k in range(3):
        if p[k] < bmin[k]:
            d = bmin[k] - p[k]
            d2 += d * d
        elif p[k] > bmax[k]:
            d = p[k] - bmax[k]
            d2 += d * d
    return d2


@njit(cache=True, nogil=True)
def bvh_point_distances(points, tris, node_min, node_max, node_left,
                        node_right, node_start, node_count, leaf_tris):
    """Exact point-to-mesh distances via best-first BVH traversal.

    points : (N, 3) float64
    tris : (M, 3, 3) float64 triangle corners
    node_* : flattened BVH (internal nodes carry children; leaves carry a
             [start, start+count) range into ``leaf_tris``)
    Returns (N,) float64 distances. Distances below float64 contact
    precision (~1e-14 x coordinate scale) are snapped to exactly 0 so that
    points constructed on a triangle measure zero to their own mesh.

    PERF: stack-based traversal with squared-distance pruning.
    """
    n = points.shape[0]
    out = np.empty(n, dtype=np.float64)
    stack = np.empty(128, dtype=np.int64)
    for i in range(n):
        p = points[i]
        best = np.inf
        top = 0
        stack[0] = 0
        top = 1
        while top > 0:
            top -= 1
            node = stack[top]
            if _box_dist2(p, node_min[node], node_max[node]) >= best:
                continue
            if node_left[node] < 0:  # leaf
                s = node_start[node]
                for j in range(s, s + node_count[node]):
                    t = leaf_tris[j]
                    d2 = _tri_closest_dist2(p, tris[t, 0], tris[t, 1],
                                            tris[t, 2])
                    if d2 < best:
                        best = d2
                continue
            l, r = node_left[node], node_right[node]
            dl = _box_dist2(p, node_min[l], node_max[l])
            dr = _box_dist2(p, node_min[r], node_max[r])
            # push the farther child first so the nearer is explored first
            if dl <= dr:
                if dr < best:
                    stack[top] = r
                    top += 1
                if dl < best:
                    stack[top] = l
                    top += 1
            else:
                if dl < best:
                    stack[top] = l
                    top += 1
                if dr < best:
                    stack[top] = r
                    top += 1
        d = np.sqrt(best)
        scale = 1.0 + max(abs(p[0]), max(abs(p[1]), abs(p[2])))
        out[i] = 0.0 if d < 1e-14 * scale else d
    return out


def build_bvh(tris: np.ndarray, leaf_size: int = 8):
    """Median-split AABB tree over triangles; arrays ready for the kernel.

    Returns a dict of flat arrays consumed by :func:`bvh_point_distances`.
    """
    m = tris.shape[0]
    lo = tris.min(axis=1)
    hi = tris.max(axis=1)
    centroids = (lo + hi) * 0.5

    node_min, node_max = [], []
    node_left, node_right = [], []
    node_start, node_count = [], []
    order = np.arange(m)

    def new_node():
        node_min.append(np.zeros(3))
        node_max.append(np.zeros(3))
        node_left.append(-1)
        node_right.append(-1)
        node_start.append(0)
        node_count.append(0)
        return len(node_min) - 1

    # iterative build: (node_index, start, end) ranges over `order`
    root = new_node()
    todo = [(root, 0, m)]
    while todo:
        node, s, e = todo.pop()
        idx = order[s:e]
        node_min[node] = lo[idx].min(axis=0)
        node_max[node] = hi[idx].max(axis=0)
        if e - s <= leaf_size:
            node_start[node] = s
            node_count[node] = e - s
            continue
        cent = centroids[idx]
        axis = int(np.argmax(cent.max(axis=0) - cent.min(axis=0)))
        mid = (e - s) // 2
        part = np.argpartition(cent[:, axis], mid)
        order[s:e] = idx[part]
        left, right = new_node(), new_node()
        node_left[node], node_right[node] = left, right
        todo.append((left, s, s + mid))
        todo.append((right, s + mid, e))

    return {
        "node_min": np.array(node_min),
        "node_max": np.array(node_max),
        "node_left": np.array(node_left, dtype=np.int64),
        "node_right": np.array(node_right, dtype=np.int64),
        "node_start": np.array(node_start, dtype=np.int64),
        "node_count": np.array(node_count, dtype=np.int64),
        "leaf_tris": order,
    }
