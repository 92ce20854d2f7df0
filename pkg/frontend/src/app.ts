/** Framework-free application controller.
 *
 * Owns the data flow between the data source and the selection store so
 * panels stay thin; every curation action round-trips through the server
 * and local state is refreshed from the response (server-authoritative).
 */

import type { DataSource } from "./api.js";
import { SelectionStore } from "./state.js";
import type {
  Detection,
  DetectionsByImage,
  ImageEntry,
  Lesion,
  LesionsDoc,
  Manifest,
} from "./types.js";

export interface FocusPose {
  position: [number, number, number];
  target: [number, number, number];
}

/** Camera pose that inspects a lesion: offset along its surface normal. */
export function lesionFocusPose(
  centroid: [number, number, number],
  normal: [number, number, number],
  offset: number,
): FocusPose {
  const len = Math.hypot(normal[0], normal[1], normal[2]) || 1;
  return {
    position: [
      centroid[0] + (normal[0] / len) * offset,
      centroid[1] + (normal[1] / len) * offset,
      centroid[2] + (normal[2] / len) * offset,
    ],
    target: [...centroid] as [number, number, number],
  };
}

export interface AppEvents {
  onError?: (message: string) => void;
  onFocus?: (pose: FocusPose) => void;
}

export class App {
  readonly store = new SelectionStore();
  manifest: Manifest | null = null;
  detections: DetectionsByImage = {};
  lesions: Lesion[] = [];
  cameraOffset = 0.4; // meters along the lesion normal

  constructor(
    readonly source: DataSource,
    readonly events: AppEvents = {},
  ) {}

  async openSession(session: string): Promise<void> {
    this.manifest = await this.source.manifest(session);
    await this.refreshData(session);
    this.store.openSession(session);
    const first = this.manifest.images[0];
    if (first) this.store.selectImage(first.id);
  }

  private async refreshData(session: string): Promise<void> {
    this.detections = await this.source.detections(session).catch(() => ({}));
    let doc: LesionsDoc | null = null;
    try {
      doc = await this.source.lesions(session);
    } catch {
      doc = null;
    }
    this.lesions = doc?.lesions ?? [];
    this.store.setData(this.detections, this.lesions);
  }

  async reload(): Promise<void> {
    const session = this.store.selection.session;
    if (session) await this.refreshData(session);
  }

  images(): ImageEntry[] {
    return this.manifest?.images ?? [];
  }

  /** Visible (not removed) detections of an image. */
  visibleDetections(imageId: string): Detection[] {
    return (this.detections[imageId] ?? []).filter((d) => !d.removed);
  }

  selectThumbnail(imageId: string): void {
    this.store.selectImage(imageId);
  }

  /** A click inside a detection's box propagates the selection everywhere,
   * including the 3D focus move when the detection belongs to a lesion. */
  selectDetection(imageId: string, detId: number): void {
    this.store.selectDetection({ imageId, detId });
    const lesionId = this.store.selection.lesionId;
    if (lesionId !== null && this.events.onFocus) {
      const lesion = this.store.lesionById(lesionId);
      if (lesion) {
        this.events.onFocus(
          lesionFocusPose(lesion.centroid, lesion.normal, this.cameraOffset),
        );
      }
    }
  }

  selectLesionMarker(lesionId: number): void {
    this.store.selectLesion(lesionId);
    const lesion = this.store.lesionById(lesionId);
    if (lesion && this.events.onFocus) {
      this.events.onFocus(
        lesionFocusPose(lesion.centroid, lesion.normal, this.cameraOffset),
      );
    }
  }

  /** Remove the active detection (soft delete on the server). */
  async removeActiveDetection(): Promise<boolean> {
    const sel = this.store.selection;
    if (!sel.session || !sel.detection) return false;
    try {
      await this.source.patchDetection(
        sel.session,
        sel.detection.imageId,
        sel.detection.detId,
        { removed: true },
      );
    } catch (err) {
      this.events.onError?.(String(err));
      return false; // no local mutation on failure
    }
    await this.refreshData(sel.session);
    this.store.clearDetection();
    return true;
  }

  /** Persist free-text notes for the active detection. */
  async annotateActiveDetection(notes: string): Promise<boolean> {
    const sel = this.store.selection;
    if (!sel.session || !sel.detection) return false;
    try {
      await this.source.patchDetection(
        sel.session,
        sel.detection.imageId,
        sel.detection.detId,
        { notes },
      );
    } catch (err) {
      this.events.onError?.(String(err));
      return false;
    }
    await this.refreshData(sel.session);
    return true;
  }
}
