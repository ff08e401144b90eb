/** Shared types mirroring the review service's JSON shapes. */

export interface LesionScore {
  lesion_id: number;
  score: number;
  max_hu: number;
  total_area_mm2: number;
  slice_span: [number, number];
}

export interface StudyReport {
  study_id: string;
  revision: number;
  total_score: number;
  category: string;
  lesion_count: number;
  per_lesion: LesionScore[];
}

export interface StudyInfo extends StudyReport {
  shape: [number, number, number];
  spacing_mm: [number, number, number];
  n_edits: number;
}

export interface LesionSummary {
  id: number;
  score: number;
  max_hu: number;
  total_area_mm2: number;
  slice_span: [number, number];
  centroid: [number, number, number];
}

export interface LesionList {
  revision: number;
  lesions: LesionSummary[];
}

/** One run: [row, startCol, length]. */
export type Run = [number, number, number];

export interface Overlay {
  revision: number;
  slice: number;
  shape: [number, number];
  runs: Run[];
  lesion_runs: { id: number; runs: Run[] }[];
}

export interface FrameMeta {
  shape: [number, number];
  revision: number;
  slice: number;
  wc: number;
  ww: number;
}

export interface Frame {
  pixels: Uint8Array;
  meta: FrameMeta;
}

export type EditOp =
  | { op: 'remove_component'; component_id: number }
  | { op: 'paint'; voxels: [number, number, number][]; value: boolean };

export type EditResult =
  | { kind: 'ok'; report: StudyReport }
  | { kind: 'conflict'; detail: string }
  | { kind: 'invalid'; detail: string };
