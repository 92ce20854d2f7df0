"""HTTP API serving session flat files to the review UI.

Read endpoints are pure views of the session directory; the only write
path is the curation PATCH, which routes through the atomic edit logic.
Readers always see either the old or the new complete file.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse
from pydantic import BaseModel

from . import fileio
from .session import CurationEdit, apply_edit, load_manifest, manifest_path


class DetectionPatch(BaseModel):
    removed: bool | None = None
    notes: str | None = None


def make_app(root, ui_dir=None) -> FastAPI:
    root = Path(root)
    app = FastAPI(title="skin lesion mapping service")
    # the review UI is served from a different origin in decoupled setups
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    def session_dir(session_id: str) -> Path:
        d = root / session_id
        if not manifest_path(d).exists():
            raise HTTPException(404, f"unknown session {session_id!r}")
        return d

    def json_file(path: Path, what: str):
        if not path.exists():
            raise HTTPException(404, f"{what} not available for this session")
        try:
            return fileio.read_json(path)
        except ValueError as exc:
            raise HTTPException(500, f"malformed {what}: {exc}") from exc

    @app.get("/api/sessions")
    def list_sessions():
        if not root.exists():
            return []
        return sorted(d.name for d in root.iterdir()
                      if d.is_dir() and manifest_path(d).exists())

    @app.get("/api/sessions/{session_id}/manifest")
    def get_manifest(session_id: str):
        d = session_dir(session_id)
        try:
            return load_manifest(d).to_json()
        except (KeyError, ValueError) as exc:
            raise HTTPException(500, f"malformed session: {exc}") from exc

    @app.get("/api/sessions/{session_id}/images/{image_id}")
    def get_image(session_id: str, image_id: str):
        d = session_dir(session_id)
        path = d / "images" / f"{image_id}.png"
        if not path.exists():
            raise HTTPException(404, f"unknown image {image_id!r}")
        return FileResponse(path, media_type="image/png")

    @app.get("/api/sessions/{session_id}/mesh")
    def get_mesh(session_id: str):
        d = session_dir(session_id)
        path = d / load_manifest(d).mesh_file
        if not path.exists():
            raise HTTPException(404, "session has no mesh")
        return FileResponse(path, media_type="text/plain",
                            filename=path.name)

    @app.get("/api/sessions/{session_id}/texture")
    def get_texture(session_id: str):
        d = session_dir(session_id)
        mesh_file = d / load_manifest(d).mesh_file
        path = mesh_file.with_name(mesh_file.stem + "_texture.png")
        if not path.exists():
            raise HTTPException(404, "session has no texture")
        return FileResponse(path, media_type="image/png")

    @app.get("/api/sessions/{session_id}/detections")
    def get_detections(session_id: str):
        return json_file(session_dir(session_id) / "detections.json",
                         "detections")

    @app.get("/api/sessions/{session_id}/detections/{image_id}")
    def get_image_detections(session_id: str, image_id: str):
        doc = json_file(session_dir(session_id) / "detections.json",
                        "detections")
        if image_id not in doc:
            raise HTTPException(404, f"unknown image {image_id!r}")
        return doc[image_id]

    @app.get("/api/sessions/{session_id}/detections/{image_id}/{det_id}")
    def get_detection(session_id: str, image_id: str, det_id: int):
        for obj in get_image_detections(session_id, image_id):
            if obj["det_id"] == det_id:
                return obj
        raise HTTPException(404, f"unknown detection {det_id}")

    @app.patch("/api/sessions/{session_id}/detections/{image_id}/{det_id}")
    def patch_detection(session_id: str, image_id: str, det_id: int,
                        patch: DetectionPatch):
        d = session_dir(session_id)
        if patch.removed is None and patch.notes is None:
            raise HTTPException(422, "patch must set removed and/or notes")
        if patch.removed is not None:
            action = "remove" if patch.removed else "restore"
        else:
            action = "annotate"
        edit = CurationEdit(image_id=image_id, det_id=det_id, action=action,
                            notes=patch.notes or "")
        try:
            return apply_edit(d, edit)
        except KeyError as exc:
            raise HTTPException(404, str(exc)) from exc

    @app.get("/api/sessions/{session_id}/lesions")
    def get_lesions(session_id: str):
        return json_file(session_dir(session_id) / "lesions3d.json",
                         "lesions")

    @app.get("/api/sessions/{session_id}/tracks")
    def get_tracks(session_id: str):
        return json_file(session_dir(session_id) / "tracks.json", "tracks")

    return app


def serve(root, host: str = "127.0.0.1", port: int = 8008,
          ui_dir=None) -> None:
    """Run the API server (blocking)."""
    import uvicorn

    uvicorn.run(make_app(root, ui_dir=ui_dir), host=host, port=port)
