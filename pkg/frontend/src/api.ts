/** Data sources: the live session API, or a static flat-file export.
 *
 * The UI performs no geometry computation and issues only these calls;
 * every edit round-trips through the server before local state changes.
 */

import type {
  DetectionPatch,
  DetectionsByImage,
  LesionsDoc,
  Manifest,
  PatchAck,
  TrackPair,
} from "./types.js";

export interface DataSource {
  readonly readOnly: boolean;
  listSessions(): Promise<string[]>;
  manifest(session: string): Promise<Manifest>;
  detections(session: string): Promise<DetectionsByImage>;
  lesions(session: string): Promise<LesionsDoc>;
  tracks(session: string): Promise<{ pairs: TrackPair[] } | null>;
  imageUrl(session: string, imageId: string): string;
  meshUrl(session: string): string;
  textureUrl(session: string): string;
  patchDetection(
    session: string,
    imageId: string,
    detId: number,
    patch: DetectionPatch,
  ): Promise<PatchAck>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function getJson<T>(url: string): Promise<T> {
  const resp = await fetch(url);
  if (!resp.ok) throw new ApiError(resp.status, `GET ${url}: ${resp.status}`);
  return (await resp.json()) as T;
}

/** Talks to the pipeline service over HTTP. */
export class ApiClient implements DataSource {
  readonly readOnly = false;

  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl}/api/${path}`;
  }

  listSessions(): Promise<string[]> {
    return getJson(this.url("sessions"));
  }

  manifest(session: string): Promise<Manifest> {
    return getJson(this.url(`sessions/${session}/manifest`));
  }

  detections(session: string): Promise<DetectionsByImage> {
    return getJson(this.url(`sessions/${session}/detections`));
  }

  lesions(session: string): Promise<LesionsDoc> {
    return getJson(this.url(`sessions/${session}/lesions`));
  }

  async tracks(session: string): Promise<{ pairs: TrackPair[] } | null> {
    try {
      return await getJson(this.url(`sessions/${session}/tracks`));
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) return null;
      throw err;
    }
  }

  imageUrl(session: string, imageId: string): string {
    return this.url(`sessions/${session}/images/${imageId}`);
  }

  meshUrl(session: string): string {
    return this.url(`sessions/${session}/mesh`);
  }

  textureUrl(session: string): string {
    return this.url(`sessions/${session}/texture`);
  }

  async patchDetection(
    session: string,
    imageId: string,
    detId: number,
    patch: DetectionPatch,
  ): Promise<PatchAck> {
    const url = this.url(`sessions/${session}/detections/${imageId}/${detId}`);
    const resp = await fetch(url, {
      method: "PATCH",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(patch),
    });
    if (!resp.ok) {
      throw new ApiError(resp.status, `PATCH ${url}: ${resp.status}`);
    }
    return (await resp.json()) as PatchAck;
  }
}

/** Reads the identical flat files from a static directory; no editing. */
export class StaticClient implements DataSource {
  readonly readOnly = true;

  constructor(readonly rootUrl: string) {}

  private sessionUrl(session: string, file: string): string {
    return `${this.rootUrl}/${session}/${file}`;
  }

  async listSessions(): Promise<string[]> {
    return getJson(`${this.rootUrl}/sessions.json`);
  }

  manifest(session: string): Promise<Manifest> {
    return getJson(this.sessionUrl(session, "manifest.json"));
  }

  detections(session: string): Promise<DetectionsByImage> {
    return getJson(this.sessionUrl(session, "detections.json"));
  }

  lesions(session: string): Promise<LesionsDoc> {
    return getJson(this.sessionUrl(session, "lesions3d.json"));
  }

  async tracks(session: string): Promise<{ pairs: TrackPair[] } | null> {
    try {
      return await getJson(this.sessionUrl(session, "tracks.json"));
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) return null;
      throw err;
    }
  }

  imageUrl(session: string, imageId: string): string {
    return this.sessionUrl(session, `images/${imageId}.png`);
  }

  meshUrl(session: string): string {
    return this.sessionUrl(session, "mesh/body.obj");
  }

  textureUrl(session: string): string {
    return this.sessionUrl(session, "mesh/body_texture.png");
  }

  patchDetection(): Promise<PatchAck> {
    return Promise.reject(
      new ApiError(405, "static export is read-only; run the service to curate"),
    );
  }
}
