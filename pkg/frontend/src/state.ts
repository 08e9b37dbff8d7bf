import { ApiClient } from "./api.js";
import { validBox } from "./geometry.js";
import type {
  AnnotationItemWire,
  AnnotationWire,
  Box,
  Candidate,
  Decision,
  FrameBundle,
  NextPreview,
  SaveResult,
} from "./types.js";

export interface StagedItem {
  box: Box;
  sound_label: string;
  detection_id?: number;
}

function toWire(item: StagedItem): AnnotationItemWire {
  const wire: AnnotationItemWire = { box: { ...item.box }, sound_label: item.sound_label };
  if (item.detection_id !== undefined) wire.detection_id = item.detection_id;
  return wire;
}

function sameItems(a: AnnotationItemWire[], b: AnnotationItemWire[]): boolean {
  if (a.length !== b.length) return false;
  return a.every((x, i) => {
    const y = b[i];
    return (
      y !== undefined &&
      x.box.x === y.box.x &&
      x.box.y === y.box.y &&
      x.box.w === y.box.w &&
      x.box.h === y.box.h &&
      x.sound_label === y.sound_label &&
      (x.detection_id ?? null) === (y.detection_id ?? null)
    );
  });
}

/**
 * Per-session view model. Holds only what the user is editing right now;
 * everything saved lives server-side, so reloading a frame always starts
 * from the server's copy.
 */
export class AnnotateSession {
  frame = 0;
  bundle: FrameBundle | null = null;
  staged: StagedItem[] = [];
  revision = 0;
  lastDecision: Decision | null = null;
  pendingPreview: NextPreview | null = null;
  history: string[] = [];
  done = false;

  private constructor(
    readonly api: ApiClient,
    readonly sessionId: string,
    readonly project: string,
    readonly nFrames: number,
  ) {}

  static async create(api: ApiClient, project: string, sessionId?: string): Promise<AnnotateSession> {
    const info = await api.createSession(project, sessionId);
    const s = new AnnotateSession(api, info.session_id, info.project, info.n_frames);
    s.revision = info.revision;
    await s.load(info.pending ?? 0);
    return s;
  }

  /** Fetch a frame bundle and reset the staging area from the server copy. */
  async load(frame: number): Promise<FrameBundle> {
    const bundle = await this.api.getFrame(this.sessionId, frame);
    this.frame = frame;
    this.bundle = bundle;
    this.revision = bundle.revision;
    this.pendingPreview = null;
    this.staged = (bundle.current_annotation?.items ?? []).map((it) => {
      const staged: StagedItem = { box: { ...it.box }, sound_label: it.sound_label };
      if (it.detection_id !== undefined && it.detection_id !== null) {
        staged.detection_id = it.detection_id;
      }
      return staged;
    });
    return bundle;
  }

  /**
   * Stage a detector candidate. Re-selecting a candidate that is already
   * staged updates it in place instead of duplicating the box.
   */
  stageCandidate(cand: Candidate, label?: string): void {
    const item: StagedItem = {
      box: { ...cand.box },
      sound_label: label ?? cand.label,
      detection_id: cand.id,
    };
    const existing = this.staged.findIndex((s) => s.detection_id === cand.id);
    if (existing >= 0) this.staged[existing] = item;
    else this.staged.push(item);
  }

  /** Stage a hand-drawn box. Returns false (and stages nothing) if degenerate. */
  stageCustomBox(box: Box, label: string): boolean {
    if (!validBox(box)) return false;
    this.staged.push({ box: { ...box }, sound_label: label });
    return true;
  }

  setLabel(index: number, label: string): void {
    const item = this.staged[index];
    if (item) item.sound_label = label;
  }

  removeStaged(index: number): void {
    this.staged.splice(index, 1);
  }

  clearStaged(): void {
    this.staged = [];
  }

  private stagedAnnotation(): AnnotationWire {
    return { frame_index: this.frame, items: this.staged.map(toWire) };
  }

  /** PUT the staging area as this frame's annotation. */
  async save(): Promise<SaveResult> {
    const result = await this.api.putAnnotation(
      this.sessionId,
      this.frame,
      this.stagedAnnotation(),
      this.revision,
    );
    this.revision = result.revision;
    this.lastDecision = result.decision;
    this.done = result.decision.kind === "done";
    const dest = this.done ? "done" : `next ${result.decision.frame}`;
    this.history.push(`saved frame ${this.frame} (${result.status}) -> ${dest}`);
    return result;
  }

  /** Save, then jump to whichever frame the scheduler asks for next. */
  async nextLabel(): Promise<SaveResult> {
    const result = await this.save();
    if (!this.done && result.decision.frame !== null) {
      await this.load(result.decision.frame);
    }
    return result;
  }

  /** Step to the adjacent frame with the propagated prediction staged. */
  async previewNext(): Promise<NextPreview> {
    const preview = await this.api.next(this.sessionId);
    await this.load(preview.frame);
    this.pendingPreview = preview;
    this.staged = preview.prediction.items.map((it) => {
      const staged: StagedItem = { box: { ...it.box }, sound_label: it.sound_label };
      if (it.detection_id !== undefined && it.detection_id !== null) {
        staged.detection_id = it.detection_id;
      }
      return staged;
    });
    return preview;
  }

  /** Accept (possibly after edits) the stepped-to frame's prediction. */
  async confirmPreview(): Promise<SaveResult> {
    if (!this.pendingPreview) throw new Error("no pending preview to confirm");
    const annotation = this.stagedAnnotation();
    const modified = !sameItems(annotation.items, this.pendingPreview.prediction.items);
    const result = await this.api.confirmNext(
      this.sessionId,
      this.pendingPreview.frame,
      annotation,
      modified,
    );
    this.pendingPreview = null;
    this.revision = result.revision;
    this.history.push(`confirmed frame ${result.frame} (${result.status})`);
    return result;
  }

  /** Jump anywhere; the move is recorded server-side, then the frame loads. */
  async moveTo(frame: number): Promise<FrameBundle> {
    const nav = await this.api.navigate(this.sessionId, frame);
    this.revision = nav.revision;
    this.history.push(`moved to frame ${frame}`);
    return this.load(nav.frame);
  }
}
