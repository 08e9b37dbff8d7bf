// Wire shapes of the v1 HTTP API. Field names mirror the server exactly.

export interface Box {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface Candidate {
  id: number;
  box: Box;
  label: string;
  confidence: number;
}

export interface AudioTag {
  label: string;
  confidence: number;
}

export interface AnnotationItemWire {
  box: Box;
  sound_label: string;
  provenance?: string;
  detection_id?: number;
}

export interface AnnotationWire {
  frame_index: number;
  items: AnnotationItemWire[];
}

export interface FrameBundle {
  frame: number;
  timestamp_ms: number;
  image_url: string;
  audio_url: string;
  status: string;
  pending: number | null;
  candidates: Candidate[];
  audio_tags: AudioTag[];
  current_annotation: AnnotationWire | null;
  revision: number;
}

export interface Decision {
  kind: "annotate_frame" | "done";
  frame: number | null;
  populated: [number, number][];
}

export interface SaveResult {
  frame: number;
  status: string;
  decision: Decision;
  revision: number;
}

export interface SessionInfo {
  session_id: string;
  project: string;
  n_frames: number;
  pending: number | null;
  revision: number;
}

export interface NextPreview {
  frame: number;
  prediction: AnnotationWire;
  revision: number;
}

export interface Thumbnail {
  frame: number;
  status: string;
  warning: boolean;
  image_url: string;
}

export interface PlaybackFrame {
  frame: number;
  status: string;
  image_url: string;
  items: AnnotationItemWire[];
}

export interface Playback {
  fps: number;
  frames: PlaybackFrame[];
}

export interface SessionStats {
  n_frames: number;
  manual_count: number;
  auto_count: number;
  auto_modified_count: number;
  skipped_count: number;
  manual_fraction: number;
  auto_fraction: number;
  auto_modified_fraction: number;
  skipped_fraction: number;
  mean_ciou: number | null;
  mean_seconds_per_human_frame: number | null;
  ciou_per_frame: (number | null)[];
  automation_fraction: number;
}

export interface ProjectInfo {
  name: string;
  n_frames: number;
  fps: number;
  frame_width: number;
  frame_height: number;
  created: string;
  sessions: string[];
}

export interface ExportPayload {
  version: number;
  project: string;
  fps: number;
  n_frames: number;
  frames: { index: number; status: string; items: AnnotationItemWire[] }[];
}
