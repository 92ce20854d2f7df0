"""File formats used by the session directories.

Depth rasters are PFM (little-endian, scale -1.0). Meshes are Wavefront OBJ
with an MTL sidecar and a single texture image. Point clouds are ASCII PLY
with float x, y, z properties. JSON artifacts are written atomically
(temp-then-rename) so a crash never leaves a torn file behind.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
from PIL import Image


# ---------------------------------------------------------------- JSON

def write_json_atomic(path, obj) -> None:
    """Serialize ``obj`` to ``path`` via a temp file in the same directory."""
    path = Path(path)
    data = json.dumps(obj, indent=1, sort_keys=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------- PFM

def write_pfm(path, values: np.ndarray) -> None:
    """Write a single-channel float raster as little-endian PFM (scale -1.0).

    PFM stores scanlines bottom-to-top; rows are flipped on write so that
    ``values[0]`` is the top image row in memory.
    """
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError("PFM writer expects a 2D raster")
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{arr.shape[1]} {arr.shape[0]}\n".encode())
        fh.write(b"-1.0\n")
        fh.write(arr[::-1].astype("<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"Pf":
            raise ValueError(f"{path}: not a grayscale PFM file")
        w, h = (int(t) for t in fh.readline().split())
        scale = float(fh.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(4 * w * h), dtype=dtype).reshape(h, w)
    return np.ascontiguousarray(data[::-1]).astype(np.float32)


# ---------------------------------------------------------------- images

def write_png(path, raster: np.ndarray) -> None:
    """Write RGB (H, W, 3) or grayscale/boolean (H, W) rasters as 8-bit PNG."""
    arr = np.asarray(raster)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    Image.fromarray(arr.astype(np.uint8)).save(path, format="PNG")


def read_png(path) -> np.ndarray:
    return np.asarray(Image.open(path))


def read_mask(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("L")) >= 128


# ---------------------------------------------------------------- OBJ / MTL

def write_obj(path, vertices: np.ndarray, faces: np.ndarray,
              uvs: np.ndarray | None = None,
              texture: np.ndarray | None = None) -> None:
    """Write a triangle mesh as OBJ; texture goes to an MTL + PNG pair.

    ``uvs`` are per-corner (M, 3, 2); each corner emits its own ``vt`` entry.
    """
    path = Path(path)
    lines = []
    if texture is not None:
        mtl = path.with_suffix(".mtl")
        tex = path.with_name(path.stem + "_texture.png")
        write_png(tex, texture)
        mtl.write_text(
            f"newmtl skin\nKa 1 1 1\nKd 1 1 1\nmap_Kd {tex.name}\n")
        lines.append(f"mtllib {mtl.name}")
        lines.append("usemtl skin")
    for v in vertices:
        lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    if uvs is not None:
        for corner in uvs.reshape(-1, 2):
            # OBJ vt origin is bottom-left; ours is top-left texel row 0
            lines.append(f"vt {corner[0]:.9g} {1.0 - corner[1]:.9g}")
        for i, f in enumerate(faces):
            t = 3 * i
            lines.append(f"f {f[0]+1}/{t+1} {f[1]+1}/{t+2} {f[2]+1}/{t+3}")
    else:
        for f in faces:
            lines.append(f"f {f[0]+1} {f[1]+1} {f[2]+1}")
    path.write_text("\n".join(lines) + "\n")


def read_obj(path):
    """Read an OBJ mesh; polygonal faces are fan-triangulated.

    Returns ``(vertices, faces, uvs, texture)``; ``uvs``/``texture`` are None
    when the file carries no texture coordinates / no MTL texture map.
    """
    path = Path(path)
    verts: list[list[float]] = []
    vts: list[list[float]] = []
    face_v: list[list[int]] = []
    face_vt: list[list[int]] = []
    texture = None
    for raw in path.read_text().splitlines():
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        tag = parts[0]
        if tag == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif tag == "vt":
            vts.append([float(parts[1]), float(parts[2])])
        elif tag == "f":
            corners = [c.split("/") for c in parts[1:]]
            vi = [int(c[0]) for c in corners]
            ti = [int(c[1]) if len(c) > 1 and c[1] else 0 for c in corners]
            nv = len(verts)
            vi = [i - 1 if i > 0 else nv + i for i in vi]
            ti = [i - 1 if i > 0 else len(vts) + i if i < 0 else -1 for i in ti]
            for k in range(1, len(vi) - 1):  # fan triangulation
                face_v.append([vi[0], vi[k], vi[k + 1]])
                face_vt.append([ti[0], ti[k], ti[k + 1]])
        elif tag == "mtllib":
            texture = _read_mtl_texture(path.parent / parts[1])
    vertices = np.array(verts, dtype=np.float64).reshape(-1, 3)
    faces = np.array(face_v, dtype=np.int64).reshape(-1, 3)
    uvs = None
    if vts and face_vt and all(t >= 0 for tri in face_vt for t in tri):
        vt = np.array(vts, dtype=np.float64)
        vt[:, 1] = 1.0 - vt[:, 1]  # back to top-left origin
        uvs = vt[np.array(face_vt, dtype=np.int64)]
    return vertices, faces, uvs, texture


def _read_mtl_texture(mtl_path: Path):
    if not mtl_path.exists():
        return None
    for raw in mtl_path.read_text().splitlines():
        parts = raw.split()
        if parts and parts[0] == "map_Kd":
            tex_path = mtl_path.parent / parts[-1]
            if tex_path.exists():
                return np.asarray(read_png(tex_path))
    return None


# ---------------------------------------------------------------- PLY

def read_ply_points(path) -> np.ndarray:
    """Read an ASCII PLY vertex cloud (float x, y, z properties only)."""
    with open(path) as fh:
        if fh.readline().strip() != "ply":
            raise ValueError(f"{path}: not a PLY file")
        n = None
        props = []
        while True:
            line = fh.readline()
            if not line:
                raise ValueError(f"{path}: unterminated PLY header")
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "format" and parts[1] != "ascii":
                raise ValueError(f"{path}: only ASCII PLY is supported")
            if parts[0] == "element" and parts[1] == "vertex":
                n = int(parts[2])
            elif parts[0] == "property" and n is not None:
                props.append(parts[2])
            elif parts[0] == "end_header":
                break
        if n is None:
            raise ValueError(f"{path}: no vertex element")
        cols = [props.index(axis) for axis in ("x", "y", "z")]
        pts = np.empty((n, 3), dtype=np.float64)
        for i in range(n):
            row = fh.readline().split()
            pts[i] = [float(row[c]) for c in cols]
    return pts


def write_ply_points(path, points: np.ndarray) -> None:
    pts = np.asarray(points, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(pts)}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        fh.write("end_header\n")
        for p in pts:
            fh.write(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")
