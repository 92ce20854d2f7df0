import shutil

import pytest
from fastapi.testclient import TestClient

from slm import fileio
from slm.service import make_app
from slm.session import run_pipeline

from .test_session import PIPE_CFG, base_session  # noqa: F401  (fixture)


@pytest.fixture
def api_root(base_session, tmp_path):  # noqa: F811
    root = tmp_path / "root"
    root.mkdir()
    dst = root / "tiny"
    shutil.copytree(base_session, dst)
    run_pipeline(dst, stages=("detect", "fuse"), config=PIPE_CFG)
    return root


@pytest.fixture
def client(api_root):
    return TestClient(make_app(api_root))


class TestReadEndpoints:
    def test_empty_root(self, tmp_path):
        c = TestClient(make_app(tmp_path / "nothing"))
        assert c.get("/api/sessions").json() == []

    def test_list_sessions(self, client):
        assert client.get("/api/sessions").json() == ["tiny"]

    def test_manifest(self, client):
        doc = client.get("/api/sessions/tiny/manifest").json()
        assert doc["session_id"] == "tiny"
        assert doc["stages"]["fused"]

    def test_unknown_session_404(self, client):
        assert client.get("/api/sessions/nope/manifest").status_code == 404

    def test_image_bytes(self, client):
        r = client.get("/api/sessions/tiny/images/A1")
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        assert r.content[:8] == b"\x89PNG\r\n\x1a\n"

    def test_unknown_image_404(self, client):
        assert client.get("/api/sessions/tiny/images/Z9").status_code == 404

    def test_mesh_and_texture(self, client):
        mesh = client.get("/api/sessions/tiny/mesh")
        assert mesh.status_code == 200
        assert b"\nv " in b"\n" + mesh.content[:4096]
        tex = client.get("/api/sessions/tiny/texture")
        assert tex.status_code == 200
        assert tex.content[:8] == b"\x89PNG\r\n\x1a\n"

    def test_lesions_content_equals_file(self, client, api_root):
        doc = client.get("/api/sessions/tiny/lesions").json()
        assert doc == fileio.read_json(api_root / "tiny" / "lesions3d.json")

    def test_detections_per_image(self, client, api_root):
        whole = client.get("/api/sessions/tiny/detections").json()
        some_image = next(iid for iid, dets in sorted(whole.items()) if dets)
        per = client.get(f"/api/sessions/tiny/detections/{some_image}").json()
        assert per == whole[some_image]
        one = client.get(
            f"/api/sessions/tiny/detections/{some_image}/{per[0]['det_id']}")
        assert one.json() == per[0]

    def test_tracks_404_when_absent(self, client):
        assert client.get("/api/sessions/tiny/tracks").status_code == 404


class TestPatchEndpoint:
    def pick(self, client):
        whole = client.get("/api/sessions/tiny/detections").json()
        for iid, dets in sorted(whole.items()):
            if dets:
                return iid, dets[0]["det_id"]
        raise AssertionError("fixture session has no detections")

    def test_remove_then_get_reflects_removed(self, client):
        iid, did = self.pick(client)
        r = client.patch(f"/api/sessions/tiny/detections/{iid}/{did}",
                         json={"removed": True})
        assert r.status_code == 200
        assert r.json()["detection"]["removed"] is True
        got = client.get(f"/api/sessions/tiny/detections/{iid}/{did}").json()
        assert got["removed"] is True

    def test_annotate_notes(self, client):
        iid, did = self.pick(client)
        r = client.patch(f"/api/sessions/tiny/detections/{iid}/{did}",
                         json={"notes": "check at next visit"})
        assert r.status_code == 200
        got = client.get(f"/api/sessions/tiny/detections/{iid}/{did}").json()
        assert got["notes"] == "check at next visit"

    def test_patch_unknown_detection_404(self, client):
        iid, _ = self.pick(client)
        r = client.patch(f"/api/sessions/tiny/detections/{iid}/424242",
                         json={"removed": True})
        assert r.status_code == 404

    def test_empty_patch_rejected(self, client):
        iid, did = self.pick(client)
        r = client.patch(f"/api/sessions/tiny/detections/{iid}/{did}",
                         json={})
        assert r.status_code == 422

    def test_restore_via_removed_false(self, client):
        iid, did = self.pick(client)
        client.patch(f"/api/sessions/tiny/detections/{iid}/{did}",
                     json={"removed": True})
        client.patch(f"/api/sessions/tiny/detections/{iid}/{did}",
                     json={"removed": False})
        got = client.get(f"/api/sessions/tiny/detections/{iid}/{did}").json()
        assert got["removed"] is False
