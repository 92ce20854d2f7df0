/** In-memory stand-in for the session API, PATCH semantics included.
 *
 * Implements the same DataSource surface the live client exposes, so the
 * controller can be driven through full scripted interactions; PATCHes
 * persist across reloads like the flat files on disk do.
 */

import type { DataSource } from "../src/api.js";
import { ApiError } from "../src/api.js";
import type {
  Detection,
  DetectionPatch,
  DetectionsByImage,
  ImageEntry,
  Lesion,
  LesionsDoc,
  Manifest,
  PatchAck,
} from "../src/types.js";

const POLES = "ABCDEFGHIJKLMNO".split("");

export function sixtyImageSession(): {
  manifest: Manifest;
  detections: DetectionsByImage;
  lesions: Lesion[];
} {
  const images: ImageEntry[] = [];
  for (const pole of POLES) {
    for (let h = 1; h <= 4; h++) {
      images.push({
        id: `${pole}${h}`,
        pole,
        height_index: h,
        path: `images/${pole}${h}.png`,
      });
    }
  }
  const det = (detId: number, x: number, y: number): Detection => ({
    det_id: detId,
    bbox: [x, y, 24, 24],
    score: 0.9,
    source: "log_baseline",
    removed: false,
    notes: "",
  });
  const detections: DetectionsByImage = Object.fromEntries(
    images.map((img) => [img.id, [] as Detection[]]),
  );
  detections["A2"] = [det(0, 100, 200), det(1, 400, 500)];
  detections["B2"] = [det(0, 140, 260)];
  detections["O2"] = [det(0, 90, 210)];
  const lesions: Lesion[] = [
    {
      global_id: 1,
      centroid: [0.12, 1.1, 0.05],
      normal: [0.9, 0.1, 0.42],
      nearest_vertex: 77,
      members: [
        { image_id: "A2", det_id: 0 },
        { image_id: "B2", det_id: 0 },
        { image_id: "O2", det_id: 0 },
      ],
    },
  ];
  return {
    manifest: {
      session_id: "demo",
      subject_id: "phantom",
      captured_at: "2026-01-01T00:00:00+00:00",
      cameras_file: "cameras.json",
      mesh_file: "mesh/body.obj",
      images,
      stages: { rendered: true, detected: true, fused: true, tracked: false },
    },
    detections,
    lesions,
  };
}

export class MockServer implements DataSource {
  readonly readOnly = false;
  readonly data = sixtyImageSession();
  patchCalls: Array<{ imageId: string; detId: number; patch: DetectionPatch }> =
    [];

  private clone<T>(v: T): T {
    return JSON.parse(JSON.stringify(v)) as T;
  }

  listSessions(): Promise<string[]> {
    return Promise.resolve(["demo"]);
  }

  manifest(): Promise<Manifest> {
    return Promise.resolve(this.clone(this.data.manifest));
  }

  detections(): Promise<DetectionsByImage> {
    return Promise.resolve(this.clone(this.data.detections));
  }

  lesions(): Promise<LesionsDoc> {
    return Promise.resolve(
      this.clone({ lesions: this.data.lesions, rejected: [] }),
    );
  }

  tracks(): Promise<null> {
    return Promise.resolve(null);
  }

  imageUrl(session: string, imageId: string): string {
    return `mock://${session}/images/${imageId}.png`;
  }

  meshUrl(session: string): string {
    return `mock://${session}/mesh.obj`;
  }

  textureUrl(session: string): string {
    return `mock://${session}/texture.png`;
  }

  patchDetection(
    _session: string,
    imageId: string,
    detId: number,
    patch: DetectionPatch,
  ): Promise<PatchAck> {
    this.patchCalls.push({ imageId, detId, patch });
    const det = (this.data.detections[imageId] ?? []).find(
      (d) => d.det_id === detId,
    );
    if (!det) {
      return Promise.reject(new ApiError(404, `unknown detection ${detId}`));
    }
    if (patch.removed !== undefined) det.removed = patch.removed;
    if (patch.notes !== undefined) det.notes = patch.notes;
    return Promise.resolve({
      ok: true,
      detection: this.clone(det),
      fused_stale: false,
    });
  }
}
