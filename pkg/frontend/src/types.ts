/** Payload shapes of the session API (flat-file JSON schemas). */

export interface ImageEntry {
  id: string;
  pole: string;
  height_index: number;
  path: string;
}

export interface Manifest {
  session_id: string;
  subject_id: string;
  captured_at: string;
  cameras_file: string;
  mesh_file: string;
  images: ImageEntry[];
  stages: Record<string, boolean>;
}

export interface Detection {
  det_id: number;
  bbox: [number, number, number, number];
  score: number;
  source: string;
  removed: boolean;
  notes: string;
}

export type DetectionsByImage = Record<string, Detection[]>;

export interface LesionMember {
  image_id: string;
  det_id: number;
}

export interface Lesion {
  global_id: number;
  centroid: [number, number, number];
  normal: [number, number, number];
  nearest_vertex: number;
  members: LesionMember[];
}

export interface LesionsDoc {
  lesions: Lesion[];
  rejected: unknown[];
}

export interface TrackPair {
  lesion_t: number;
  lesion_t1: number;
  geodesic_residual: number | null;
  matched: boolean;
}

export interface DetectionPatch {
  removed?: boolean;
  notes?: string;
}

export interface PatchAck {
  ok: boolean;
  detection: Detection;
  fused_stale: boolean;
}
