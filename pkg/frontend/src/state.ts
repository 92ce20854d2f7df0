/** Selection state shared by every panel.
 *
 * Invariants enforced on every mutation:
 *  - the active detection, when set, belongs to the active image;
 *  - the active global lesion, when both are set, contains the active
 *    detection among its members.
 */

import type { Detection, DetectionsByImage, Lesion } from "./types.js";

export interface DetectionRef {
  imageId: string;
  detId: number;
}

export interface Selection {
  session: string | null;
  imageId: string | null;
  lesionId: number | null;
  detection: DetectionRef | null;
}

export type Listener = (sel: Selection) => void;

export class SelectionStore {
  private sel: Selection = {
    session: null,
    imageId: null,
    lesionId: null,
    detection: null,
  };
  private listeners: Listener[] = [];
  private lesions: Lesion[] = [];
  private detections: DetectionsByImage = {};

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  get selection(): Selection {
    return { ...this.sel };
  }

  /** Server-authoritative data the selection is validated against. */
  setData(detections: DetectionsByImage, lesions: Lesion[]): void {
    this.detections = detections;
    this.lesions = lesions;
    // re-validate the current selection against the fresh data
    const det = this.sel.detection;
    if (det && !this.findDetection(det.imageId, det.detId)) {
      this.sel.detection = null;
      this.sel.lesionId = null;
    } else if (det) {
      this.sel.lesionId = this.lesionContaining(det)?.global_id ?? null;
    }
    this.emit();
  }

  findDetection(imageId: string, detId: number): Detection | undefined {
    return (this.detections[imageId] ?? []).find((d) => d.det_id === detId);
  }

  lesionContaining(ref: DetectionRef): Lesion | undefined {
    return this.lesions.find((l) =>
      l.members.some(
        (m) => m.image_id === ref.imageId && m.det_id === ref.detId,
      ),
    );
  }

  lesionById(id: number): Lesion | undefined {
    return this.lesions.find((l) => l.global_id === id);
  }

  activeDetection(): Detection | null {
    const ref = this.sel.detection;
    if (!ref) return null;
    return this.findDetection(ref.imageId, ref.detId) ?? null;
  }

  openSession(session: string): void {
    this.sel = { session, imageId: null, lesionId: null, detection: null };
    this.emit();
  }

  selectImage(imageId: string): void {
    this.sel.imageId = imageId;
    const det = this.sel.detection;
    if (det && det.imageId !== imageId) {
      this.sel.detection = null;
      this.sel.lesionId = null;
    }
    this.emit();
  }

  selectDetection(ref: DetectionRef): void {
    if (!this.findDetection(ref.imageId, ref.detId)) {
      throw new Error(`unknown detection ${ref.imageId}/${ref.detId}`);
    }
    this.sel.imageId = ref.imageId;
    this.sel.detection = { ...ref };
    this.sel.lesionId = this.lesionContaining(ref)?.global_id ?? null;
    this.emit();
  }

  /** Select a 3D lesion; the active image follows its first sighting,
   * preferring a sighting in the currently open image. */
  selectLesion(lesionId: number): void {
    const lesion = this.lesionById(lesionId);
    if (!lesion) throw new Error(`unknown lesion ${lesionId}`);
    const member =
      lesion.members.find((m) => m.image_id === this.sel.imageId) ??
      lesion.members[0];
    this.sel.lesionId = lesionId;
    if (member) {
      this.sel.imageId = member.image_id;
      this.sel.detection = { imageId: member.image_id, detId: member.det_id };
    } else {
      this.sel.detection = null;
    }
    this.emit();
  }

  clearDetection(): void {
    this.sel.detection = null;
    this.sel.lesionId = null;
    this.emit();
  }

  /** Throws when a panel would show inconsistent references. */
  assertCoherent(): void {
    const { imageId, lesionId, detection } = this.sel;
    if (detection) {
      if (detection.imageId !== imageId) {
        throw new Error("active detection is not in the active image");
      }
      if (lesionId !== null) {
        const lesion = this.lesionById(lesionId);
        const member = lesion?.members.some(
          (m) =>
            m.image_id === detection.imageId && m.det_id === detection.detId,
        );
        if (!member) {
          throw new Error("active lesion does not contain active detection");
        }
      }
    }
  }

  private emit(): void {
    this.assertCoherent();
    const snapshot = this.selection;
    for (const fn of this.listeners) fn(snapshot);
  }
}
