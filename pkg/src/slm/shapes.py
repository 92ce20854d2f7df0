"""Procedural test meshes: icospheres, capsules and simple deformations.

The capsule doubles as the standing phantom for synthetic rig sessions:
a vertical cylinder with hemispherical caps, feet at y=0, wrapped in a
cylindrical UV chart with a duplicated seam column.
"""

from __future__ import annotations

import numpy as np

from .meshops import TriMesh


def icosphere(radius: float = 1.0, subdivisions: int = 2,
              center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Icosahedron subdivided ``subdivisions`` times, projected to a sphere."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=np.float64)
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    for _ in range(subdivisions):
        verts, faces = _subdivide_on_sphere(verts, faces)
    return TriMesh(verts * radius + np.asarray(center, dtype=np.float64), faces)


def _subdivide_on_sphere(verts, faces):
    cache: dict[tuple[int, int], int] = {}
    verts = list(map(np.array, verts))

    def midpoint(i, j):
        key = (min(i, j), max(i, j))
        if key not in cache:
            m = verts[i] + verts[j]
            m /= np.linalg.norm(m)
            verts.append(m)
            cache[key] = len(verts) - 1
        return cache[key]

    out = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        out.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]])
    return np.array(verts), np.array(out, dtype=np.int64)


def capsule(radius: float = 0.15, height: float = 1.75,
            n_theta: int = 96, n_profile: int = 128,
            texture: np.ndarray | None = None) -> TriMesh:
    """Standing capsule phantom: feet at y=0, axis +y, cylindrical UVs.

    ``n_profile`` rings run from the bottom pole to the top pole along an
    arc-length parametrized profile (hemisphere / cylinder / hemisphere);
    ``n_theta`` columns wrap around with a duplicated seam so texture
    interpolation never crosses u=1 -> 0.
    """
    if height <= 2 * radius:
        raise ValueError("capsule height must exceed its diameter")
    cyl_len = height - 2 * radius
    arc = np.pi * radius / 2.0
    total = 2 * arc + cyl_len

    def profile(s: float) -> tuple[float, float]:
        """Arc length -> (ring radius, ring height)."""
        if s <= arc:
            phi = s / radius
            return radius * np.sin(phi), radius * (1.0 - np.cos(phi))
        if s <= arc + cyl_len:
            return radius, radius + (s - arc)
        phi = (s - arc - cyl_len) / radius
        return radius * np.cos(phi), (height - radius) + radius * np.sin(phi)

    verts, uv_grid = [], []
    thetas = np.linspace(0.0, 2 * np.pi, n_theta + 1)
    for i in range(1, n_profile):  # interior rings, poles handled as fans
        s = total * i / n_profile
        rho, y = profile(s)
        v_tex = 1.0 - i / n_profile
        for j, th in enumerate(thetas):
            verts.append([rho * np.cos(th), y, rho * np.sin(th)])
            uv_grid.append([j / n_theta, v_tex])
    bottom = len(verts)
    verts.append([0.0, 0.0, 0.0])
    uv_grid.append([0.5, 1.0])
    top = len(verts)
    verts.append([0.0, height, 0.0])
    uv_grid.append([0.5, 0.0])

    cols = n_theta + 1
    faces, uvs = [], []
    uv_grid = np.array(uv_grid)

    def emit(a, b, c):
        faces.append([a, b, c])
        uvs.append([uv_grid[a], uv_grid[b], uv_grid[c]])

    for i in range(n_profile - 2):
        r0, r1 = i * cols, (i + 1) * cols
        for j in range(n_theta):
            emit(r0 + j, r1 + j, r1 + j + 1)
            emit(r0 + j, r1 + j + 1, r0 + j + 1)
    for j in range(n_theta):  # pole fans
        emit(bottom, j + 1, j)
        last = (n_profile - 2) * cols
        emit(top, last + j, last + j + 1)

    return TriMesh(np.array(verts), np.array(faces, dtype=np.int64),
                   np.array(uvs), texture)


def skin_texture(size: int = 1024, base=(198, 161, 122),
                 gradient: int = 12) -> np.ndarray:
    """Uniform skin-tone texture with a mild vertical shading gradient."""
    tex = np.empty((size, size, 3), dtype=np.float64)
    ramp = np.linspace(-gradient, gradient, size)[:, None]
    for c in range(3):
        tex[..., c] = base[c] + ramp
    return np.clip(tex, 0, 255).astype(np.uint8)


def bend(mesh: TriMesh, pivot_y: float = 1.0, angle_deg: float = 20.0) -> TriMesh:
    """Smoothly bend everything above ``pivot_y`` about the x axis.

    Topology (and therefore vertex correspondence) is preserved, so the bent
    mesh pairs with the original through the identity correspondence.
    """
    v = mesh.vertices.copy()
    top = v[:, 1].max()
    if top <= pivot_y:
        return TriMesh(v, mesh.faces.copy(), None if mesh.uvs is None else mesh.uvs.copy(), mesh.texture)
    t = np.clip((v[:, 1] - pivot_y) / (top - pivot_y), 0.0, 1.0)
    ang = np.deg2rad(angle_deg) * t * t * (3 - 2 * t)  # smoothstep ramp
    y, z = v[:, 1] - pivot_y, v[:, 2]
    v[:, 1] = pivot_y + np.cos(ang) * y - np.sin(ang) * z
    v[:, 2] = np.sin(ang) * y + np.cos(ang) * z
    return TriMesh(v, mesh.faces.copy(),
                   None if mesh.uvs is None else mesh.uvs.copy(), mesh.texture)
