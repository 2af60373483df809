/** JSON payload shapes of the /api/v1 service, mirrored field for field. */

export interface ProjectInfo {
  categories: string[];
  gcps_configured: boolean;
  preview_configured: boolean;
  radius_m: number;
  image_count: number;
}

export interface ImageEntry {
  id: number;
  file_name: string;
  width: number;
  height: number;
  annotations_version: number;
}

export type BBoxTuple = [number, number, number, number]; // x, y, w, h

export interface ApiAnnotation {
  bbox: BBoxTuple;
  category_id: number;
}

export interface AnnotationDoc {
  version: number;
  annotations: ApiAnnotation[];
}

export interface AnnotationSaveResponse extends AnnotationDoc {
  previous_version: number;
}

export interface GcpMark {
  gcp: string;
  image: string;
  col: number;
  row: number;
  confirmed: boolean;
}

export interface MarksDoc {
  version: number;
  marks: GcpMark[];
}

export interface MarksSaveResponse extends MarksDoc {
  previous_version: number;
}

export interface CandidateEntry {
  image: string;
  image_id: number | null;
  distance_m: number;
}

export interface CandidatesDoc {
  gcp: string;
  radius_m: number;
  candidates: CandidateEntry[];
}

export interface ProjectedItem {
  det_id: number;
  status: string;
  src_bbox: BBoxTuple;
  /** minx, miny, maxx, maxy in world metres; present when status is "ok". */
  world_bbox?: [number, number, number, number];
  /** x, y, w, h in orthomosaic pixels; present when status is "ok". */
  ortho_bbox?: BBoxTuple;
}

export interface PreviewPair {
  projected: number;
  manual: number;
  iou: number;
}

export interface PreviewDoc {
  image_id: number;
  projected: ProjectedItem[];
  manual?: BBoxTuple[];
  pairs?: PreviewPair[];
}

export interface ExportResponse {
  written: string[];
  lines?: number;
  annotations?: number;
}
