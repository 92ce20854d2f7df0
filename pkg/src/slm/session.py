"""Session directories, the stage state machine and curation edits.

A session is a directory of flat files (images, depth, masks, cameras,
mesh, detection/lesion/track JSON) plus a manifest recording which pipeline
stages ran, with what parameters and artifact hashes. All JSON writes are
atomic; curation edits are soft-deletes so the audit trail survives.
"""

from __future__ import annotations

import datetime
import hashlib
import threading
from dataclasses import dataclass, field
from pathlib import Path

from . import camgeom, fileio, render
from .detect import (LOG_SCALES, SOFT_NMS_FLOOR, SOFT_NMS_SIGMA,
                     detect_image_tiled, load_detections, save_detections)
from .fuse3d import (DISTANCE_THRESHOLD, MIN_CLUSTER_SIZE, fuse_sightings,
                     lift, save_registry)
from .meshops import TriMesh
from .render import CaptureCylinder, DepthImage, SubjectMask

STAGES = ("rendered", "detected", "fused", "tracked")
_STAGE_ARTIFACTS = {
    "rendered": ("depth", "masks"),
    "detected": ("detections.json",),
    "fused": ("lesions3d.json",),
    "tracked": ("tracks.json",),
}
_DOWNSTREAM = {
    "rendered": ("detected", "fused", "tracked"),
    "detected": ("fused", "tracked"),
    "fused": ("tracked",),
    "tracked": (),
}

_session_locks: dict[str, threading.Lock] = {}
_locks_guard = threading.Lock()


def session_lock(session_dir) -> threading.Lock:
    key = str(Path(session_dir).resolve())
    with _locks_guard:
        return _session_locks.setdefault(key, threading.Lock())


class DependencyError(RuntimeError):
    """A stage was requested before its prerequisite stage ran."""

    def __init__(self, stage: str, missing: str):
        super().__init__(f"stage '{stage}' requires '{missing}' to run first")
        self.stage = stage
        self.missing = missing


@dataclass
class CurationEdit:
    """One clinician edit against a detection."""

    image_id: str
    det_id: int
    action: str  # remove | restore | annotate
    notes: str = ""
    edited_at: str = ""

    def __post_init__(self):
        if self.action not in ("remove", "restore", "annotate"):
            raise ValueError(f"unknown curation action {self.action!r}")
        if not self.edited_at:
            self.edited_at = datetime.datetime.now(
                datetime.timezone.utc).isoformat(timespec="seconds")


@dataclass
class SessionManifest:
    """Pipeline state of one session directory."""

    session_id: str
    subject_id: str = ""
    captured_at: str = ""
    cameras_file: str = "cameras.json"
    mesh_file: str = "mesh/body.obj"
    images: list = field(default_factory=list)
    stages: dict = field(default_factory=lambda: {s: False for s in STAGES})
    stage_info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id, "subject_id": self.subject_id,
            "captured_at": self.captured_at,
            "cameras_file": self.cameras_file, "mesh_file": self.mesh_file,
            "images": self.images, "stages": self.stages,
            "stage_info": self.stage_info,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SessionManifest":
        m = cls(session_id=doc["session_id"])
        m.subject_id = doc.get("subject_id", "")
        m.captured_at = doc.get("captured_at", "")
        m.cameras_file = doc.get("cameras_file", "cameras.json")
        m.mesh_file = doc.get("mesh_file", "mesh/body.obj")
        m.images = doc.get("images", [])
        m.stages = {s: bool(doc.get("stages", {}).get(s, False))
                    for s in STAGES}
        m.stage_info = doc.get("stage_info", {})
        return m


def manifest_path(session_dir) -> Path:
    return Path(session_dir) / "manifest.json"


def save_manifest(session_dir, manifest: SessionManifest) -> None:
    fileio.write_json_atomic(manifest_path(session_dir), manifest.to_json())


def load_manifest(session_dir) -> SessionManifest:
    """Load and self-check a manifest.

    A stage flag may only stay true when its artifact files are actually
    present, and flags stay monotone (fused implies detected implies
    rendered; tracked implies fused).
    """
    path = manifest_path(session_dir)
    if not path.exists():
        raise FileNotFoundError(f"{session_dir} has no manifest.json")
    m = SessionManifest.from_json(fileio.read_json(path))
    root = Path(session_dir)
    changed = False
    for stage, artifacts in _STAGE_ARTIFACTS.items():
        if m.stages.get(stage) and not all((root / a).exists()
                                           for a in artifacts):
            m.stages[stage] = False
            changed = True
    for earlier, later in zip(STAGES, STAGES[1:]):
        if m.stages[later] and not m.stages[earlier]:
            m.stages[later] = False
            changed = True
    if changed:
        save_manifest(session_dir, m)
    return m


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def init_session(session_dir, session_id: str, subject_id: str = "",
                 images: list | None = None,
                 rendered: bool = False, extra: dict | None = None
                 ) -> SessionManifest:
    """Create the manifest for a (new or ingested) session directory."""
    m = SessionManifest(session_id=session_id, subject_id=subject_id)
    m.captured_at = datetime.datetime.now(
        datetime.timezone.utc).isoformat(timespec="seconds")
    m.images = images or []
    m.stages["rendered"] = rendered
    if extra:
        m.stage_info.update(extra)
    save_manifest(session_dir, m)
    return m


# ------------------------------------------------------------------ stages

def _invalidate_downstream(m: SessionManifest, stage: str) -> None:
    for later in _DOWNSTREAM[stage]:
        m.stages[later] = False


def _record_stage(session_dir, m: SessionManifest, stage: str, params: dict,
                  artifacts: list[str]) -> None:
    from . import __version__

    root = Path(session_dir)
    m.stages[stage] = True
    m.stage_info[stage] = {
        "params": params,
        "tool_version": __version__,
        "hashes": {a: file_sha256(root / a) for a in artifacts},
    }
    _invalidate_downstream(m, stage)
    save_manifest(session_dir, m)


def run_preprocess(session_dir, config: dict | None = None) -> SessionManifest:
    """Render per-camera depth images and subject masks from the mesh."""
    config = config or {}
    root = Path(session_dir)
    m = load_manifest(session_dir)
    cams = camgeom.load_cameras(root / m.cameras_file)
    mesh = TriMesh.load(root / m.mesh_file)
    cyl = CaptureCylinder(**config.get("capture", {}))
    (root / "depth").mkdir(exist_ok=True)
    (root / "masks").mkdir(exist_ok=True)
    for cam in cams:
        _, depth = render.rasterize(mesh, cam)
        mask = render.subject_mask(depth, cam, cyl)
        fileio.write_pfm(root / "depth" / f"{cam.id}.pfm", depth.values)
        fileio.write_png(root / "masks" / f"{cam.id}.png", mask.values)
    params = {"capture": {"radius": cyl.radius, "y_min": cyl.y_min,
                          "y_max": cyl.y_max}}
    artifacts = [f"depth/{c.id}.pfm" for c in cams]
    artifacts += [f"masks/{c.id}.png" for c in cams]
    _record_stage(session_dir, m, "rendered", params, artifacts)
    return m


def run_detect(session_dir, config: dict | None = None) -> SessionManifest:
    """Run the tiled LoG baseline over every session image."""
    config = config or {}
    root = Path(session_dir)
    m = load_manifest(session_dir)
    if not m.stages["rendered"]:
        raise DependencyError("detect", "rendered")
    params = {
        "tile": int(config.get("tile", 608)),
        "overlap": float(config.get("overlap", 0.5)),
        "scales": [float(s) for s in config.get("scales", LOG_SCALES)],
        "threshold": float(config.get("threshold", 0.05)),
        "nms_sigma": float(config.get("nms_sigma", SOFT_NMS_SIGMA)),
        "nms_floor": float(config.get("nms_floor", SOFT_NMS_FLOOR)),
    }
    min_box = config.get("min_box_px")
    if min_box is None and m.images:
        sample = fileio.read_png(root / m.images[0]["path"])
        min_box = max(2.0, 5.0 * sample.shape[1] / 4000.0)
    params["min_box_px"] = float(min_box if min_box is not None else 5.0)

    per_image = {}
    for entry in m.images:
        iid = entry["id"]
        image = fileio.read_png(root / entry["path"])
        mask_file = root / "masks" / f"{iid}.png"
        mask = fileio.read_mask(mask_file) if mask_file.exists() else None
        per_image[iid] = detect_image_tiled(
            image, mask, iid, tile_size=params["tile"],
            overlap=params["overlap"], scales=params["scales"],
            response_threshold=params["threshold"],
            min_box_px=params["min_box_px"], nms_sigma=params["nms_sigma"],
            nms_floor=params["nms_floor"])
    save_detections(root / "detections.json", per_image)
    _record_stage(session_dir, m, "detected", params, ["detections.json"])
    return m


def run_fuse(session_dir, config: dict | None = None) -> SessionManifest:
    """Lift detections to 3D and build the global lesion registry."""
    config = config or {}
    root = Path(session_dir)
    m = load_manifest(session_dir)
    for prereq in ("rendered", "detected"):
        if not m.stages[prereq]:
            raise DependencyError("fuse", prereq)
    params = {
        "threshold": float(config.get("threshold", DISTANCE_THRESHOLD)),
        "min_cluster": int(config.get("min_cluster", MIN_CLUSTER_SIZE)),
    }
    cams = {c.id: c for c in camgeom.load_cameras(root / m.cameras_file)}
    mesh = TriMesh.load(root / m.mesh_file)
    dets = load_detections(root / "detections.json")
    sightings, off_subject = [], []
    for iid in sorted(dets):
        if not dets[iid]:
            continue
        cam = cams[iid]
        depth = DepthImage(fileio.read_pfm(root / "depth" / f"{iid}.pfm"))
        mask = SubjectMask(fileio.read_mask(root / "masks" / f"{iid}.png"))
        for det in dets[iid]:
            if det.removed:
                continue
            s = lift(det, depth, mask, cam)
            if s is None:
                off_subject.append((iid, det.det_id))
            else:
                sightings.append(s)
    registry, rejected = fuse_sightings(
        sightings, mesh, distance_threshold=params["threshold"],
        min_cluster_size=params["min_cluster"])
    save_registry(root / "lesions3d.json", registry, rejected, off_subject)
    _record_stage(session_dir, m, "fused", params, ["lesions3d.json"])
    return m


def record_tracked(session_dir, params: dict) -> SessionManifest:
    """Mark a session as tracked after tracks.json was written into it."""
    with session_lock(session_dir):
        m = load_manifest(session_dir)
        _record_stage(session_dir, m, "tracked", params, ["tracks.json"])
    return m


_STAGE_RUNNERS = {
    "rendered": run_preprocess,
    "detected": run_detect,
    "fused": run_fuse,
}


def run_pipeline(session_dir, stages=("rendered", "detected", "fused"),
                 config: dict | None = None) -> SessionManifest:
    """Run the requested stages in pipeline order under the session lock.

    ``config`` is namespaced per stage: {"preprocess": {...},
    "detect": {...}, "fuse": {...}}.
    """
    config = config or {}
    aliases = {"preprocess": "rendered", "detect": "detected", "fuse": "fused"}
    cfg_key = {"rendered": "preprocess", "detected": "detect",
               "fused": "fuse"}
    wanted = [aliases.get(s, s) for s in stages]
    for s in wanted:
        if s not in _STAGE_RUNNERS:
            raise ValueError(f"unknown stage {s!r}")
    with session_lock(session_dir):
        m = load_manifest(session_dir)
        for stage in [s for s in ("rendered", "detected", "fused")
                      if s in wanted]:
            m = _STAGE_RUNNERS[stage](session_dir,
                                      config.get(cfg_key[stage], {}))
    return m


# ------------------------------------------------------------------ curation

def apply_edit(session_dir, edit: CurationEdit) -> dict:
    """Apply a curation edit to detections.json atomically.

    Removed detections are kept with removed=true (soft delete). If the
    edited detection is a member of a fused cluster, the fused stage is
    marked stale. Returns an acknowledgment with the updated detection.
    """
    root = Path(session_dir)
    with session_lock(session_dir):
        m = load_manifest(session_dir)
        det_path = root / "detections.json"
        if not det_path.exists():
            raise KeyError("session has no detections to edit")
        doc = fileio.read_json(det_path)
        objs = doc.get(edit.image_id)
        if objs is None:
            raise KeyError(f"unknown image id {edit.image_id!r}")
        target = next((o for o in objs if o["det_id"] == edit.det_id), None)
        if target is None:
            raise KeyError(
                f"unknown detection {edit.image_id!r}/{edit.det_id}")
        if edit.action == "remove":
            target["removed"] = True
        elif edit.action == "restore":
            target["removed"] = False
        if edit.notes or edit.action == "annotate":
            target["notes"] = edit.notes
        target["edited_at"] = edit.edited_at
        fileio.write_json_atomic(det_path, doc)

        stale_fuse = False
        if edit.action in ("remove", "restore") and m.stages["fused"]:
            lesions = fileio.read_json(root / "lesions3d.json")
            key = {"image_id": edit.image_id, "det_id": edit.det_id}
            for lesion in lesions.get("lesions", []):
                if key in lesion.get("members", []):
                    stale_fuse = True
                    break
            if stale_fuse:
                m.stages["fused"] = False
                _invalidate_downstream(m, "fused")
                save_manifest(session_dir, m)
    return {"ok": True, "detection": target, "fused_stale": stale_fuse}
