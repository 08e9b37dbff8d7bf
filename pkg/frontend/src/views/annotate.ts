import { ApiError } from "../api.js";
import {
  canvasToImage,
  clampPanel,
  fitScale,
  hitCandidate,
  imageToCanvas,
  normalizeDrag,
  validBox,
} from "../geometry.js";
import type { AnnotateSession } from "../state.js";
import type { Box, Candidate } from "../types.js";

export interface AudioPlayer {
  play(url: string): void;
}

export const htmlAudioPlayer: AudioPlayer = {
  play(url: string): void {
    const el = new Audio(url);
    void el.play().catch(() => {
      // Autoplay can be blocked until the first user gesture; the replay
      // button covers that case.
    });
  },
};

const CANDIDATE_COLORS = ["#4ade80", "#60a5fa", "#fbbf24", "#f87171", "#c084fc"];
const MAX_CANVAS_W = 720;
const MAX_CANVAS_H = 540;

interface Drag {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

/**
 * Single-frame annotation screen: frame canvas with candidate boxes, a
 * staging list with per-item label pickers, and the two advance actions.
 */
export class AnnotateView {
  private root: HTMLElement | null = null;
  private canvas: HTMLCanvasElement | null = null;
  private image: HTMLImageElement | null = null;
  private drag: Drag | null = null;
  private scale = 1;
  private status = "";
  private labelPanel: HTMLElement | null = null;
  private lastAudioFrame = -1;
  private keyHandler: ((ev: KeyboardEvent) => void) | null = null;

  constructor(
    private readonly session: AnnotateSession,
    private readonly audio: AudioPlayer = htmlAudioPlayer,
  ) {}

  mount(root: HTMLElement): void {
    this.root = root;
    this.keyHandler = (ev) => this.onKey(ev);
    document.addEventListener("keydown", this.keyHandler);
    this.render();
  }

  unmount(): void {
    if (this.keyHandler) document.removeEventListener("keydown", this.keyHandler);
    this.keyHandler = null;
    this.root = null;
  }

  private flash(message: string): void {
    this.status = message;
    const el = this.root?.querySelector(".statusline");
    if (el) el.textContent = message;
  }

  private async guard<T>(action: () => Promise<T>): Promise<T | null> {
    try {
      return await action();
    } catch (err) {
      if (err instanceof ApiError) {
        this.flash(err.detail);
        if (err.status === 409) await this.session.load(this.session.frame);
        this.render();
        return null;
      }
      throw err;
    }
  }

  private onKey(ev: KeyboardEvent): void {
    if (ev.target instanceof HTMLInputElement || ev.target instanceof HTMLSelectElement) return;
    const session = this.session;
    switch (ev.key) {
      case "s":
        void this.guard(() => session.save()).then(() => this.render());
        break;
      case "n":
        void this.advanceNextLabel();
        break;
      case "p":
        void this.guard(() => session.previewNext()).then(() => this.render());
        break;
      case "d":
        if (session.pendingPreview) {
          void this.guard(() => session.confirmPreview()).then(() => this.render());
        }
        break;
      case "r":
        this.replayAudio();
        break;
      case "Delete":
      case "Backspace":
        session.clearStaged();
        this.render();
        break;
      default:
        return;
    }
    ev.preventDefault();
  }

  private replayAudio(): void {
    const bundle = this.session.bundle;
    if (bundle) this.audio.play(this.session.api.mediaUrl(bundle.audio_url));
  }

  private async advanceNextLabel(): Promise<void> {
    const result = await this.guard(() => this.session.nextLabel());
    if (result) {
      this.flash(
        result.decision.kind === "done"
          ? "all frames settled - open Review"
          : `now on frame ${this.session.frame}`,
      );
    }
    this.render();
  }

  private defaultLabel(): string {
    const tags = this.session.bundle?.audio_tags ?? [];
    return tags[0]?.label ?? "unknown";
  }

  private stageCandidate(cand: Candidate): void {
    this.session.stageCandidate(cand, this.defaultLabel());
    this.render();
  }

  private finishDrag(): void {
    if (!this.drag) return;
    const { x0, y0, x1, y1 } = this.drag;
    this.drag = null;
    const p0 = canvasToImage(x0, y0, this.scale);
    const p1 = canvasToImage(x1, y1, this.scale);
    const box = normalizeDrag(p0.x, p0.y, p1.x, p1.y);
    if (Math.abs(x1 - x0) < 3 && Math.abs(y1 - y0) < 3) {
      // Treat tiny drags as clicks: select the candidate under the cursor.
      const cand = hitCandidate(this.session.bundle?.candidates ?? [], p0.x, p0.y);
      if (cand) this.stageCandidate(cand);
      return;
    }
    if (!validBox(box)) {
      this.flash("box must have positive width and height");
      return;
    }
    if (!this.session.stageCustomBox(box, this.defaultLabel())) {
      this.flash("box must have positive width and height");
      return;
    }
    this.render();
  }

  // -- rendering -------------------------------------------------------------

  render(): void {
    const root = this.root;
    if (!root) return;
    const session = this.session;
    const bundle = session.bundle;
    root.innerHTML = "";
    if (!bundle) {
      root.textContent = "loading...";
      return;
    }

    if (bundle.frame !== this.lastAudioFrame) {
      this.lastAudioFrame = bundle.frame;
      this.audio.play(session.api.mediaUrl(bundle.audio_url));
    }

    const header = document.createElement("div");
    header.className = "toolbar";
    header.append(
      this.navButtons(),
      this.textSpan(
        `frame ${bundle.frame} / ${session.nFrames - 1} - ${bundle.status}` +
          (session.pendingPreview ? " (preview)" : ""),
        "frame-label",
      ),
    );
    root.append(header);

    const body = document.createElement("div");
    body.className = "annotate-body";
    body.append(this.canvasPane(), this.sidePane());
    root.append(body);

    const status = document.createElement("div");
    status.className = "statusline";
    status.textContent = this.status;
    root.append(status);
  }

  private textSpan(text: string, cls: string): HTMLElement {
    const el = document.createElement("span");
    el.className = cls;
    el.textContent = text;
    return el;
  }

  private button(label: string, title: string, onClick: () => void): HTMLButtonElement {
    const btn = document.createElement("button");
    btn.textContent = label;
    btn.title = title;
    btn.addEventListener("click", onClick);
    return btn;
  }

  private navButtons(): HTMLElement {
    const wrap = document.createElement("div");
    wrap.className = "nav-buttons";
    const session = this.session;
    wrap.append(
      this.button("Save [s]", "store this frame's boxes", () => {
        void this.guard(() => session.save()).then(() => this.render());
      }),
      this.button("Next Label [n]", "save and jump to the next requested frame", () => {
        void this.advanceNextLabel();
      }),
      this.button("Next [p]", "preview the propagated next frame", () => {
        void this.guard(() => session.previewNext()).then(() => this.render());
      }),
    );
    if (session.pendingPreview) {
      wrap.append(
        this.button("Confirm [d]", "accept the previewed prediction", () => {
          void this.guard(() => session.confirmPreview()).then(() => this.render());
        }),
      );
    }
    wrap.append(
      this.button("Replay audio [r]", "play this frame's audio again", () => this.replayAudio()),
    );
    const moveInput = document.createElement("input");
    moveInput.type = "number";
    moveInput.min = "0";
    moveInput.max = String(session.nFrames - 1);
    moveInput.placeholder = "frame";
    moveInput.className = "move-input";
    wrap.append(
      moveInput,
      this.button("Move To", "jump to an arbitrary frame", () => {
        const target = Number(moveInput.value);
        if (!Number.isInteger(target) || target < 0 || target >= session.nFrames) {
          this.flash(`frame must be 0..${session.nFrames - 1}`);
          return;
        }
        void this.guard(() => session.moveTo(target)).then(() => this.render());
      }),
    );
    return wrap;
  }

  private canvasPane(): HTMLElement {
    const pane = document.createElement("div");
    pane.className = "canvas-pane";
    const bundle = this.session.bundle;
    if (!bundle) return pane;

    const canvas = document.createElement("canvas");
    this.canvas = canvas;
    canvas.className = "frame-canvas";
    pane.append(canvas);

    const img = new Image();
    this.image = img;
    img.onload = () => {
      this.scale = fitScale(img.naturalWidth, img.naturalHeight, MAX_CANVAS_W, MAX_CANVAS_H);
      canvas.width = Math.round(img.naturalWidth * this.scale);
      canvas.height = Math.round(img.naturalHeight * this.scale);
      this.draw();
    };
    img.src = this.session.api.mediaUrl(bundle.image_url);

    canvas.addEventListener("mousedown", (ev) => {
      const rect = canvas.getBoundingClientRect();
      const x = ev.clientX - rect.left;
      const y = ev.clientY - rect.top;
      this.drag = { x0: x, y0: y, x1: x, y1: y };
    });
    canvas.addEventListener("mousemove", (ev) => {
      if (!this.drag) return;
      const rect = canvas.getBoundingClientRect();
      this.drag.x1 = ev.clientX - rect.left;
      this.drag.y1 = ev.clientY - rect.top;
      this.draw();
    });
    canvas.addEventListener("mouseup", () => this.finishDrag());
    canvas.addEventListener("mouseleave", () => {
      this.drag = null;
      this.draw();
    });
    return pane;
  }

  private draw(): void {
    const canvas = this.canvas;
    const img = this.image;
    const bundle = this.session.bundle;
    if (!canvas || !img || !bundle) return;
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.drawImage(img, 0, 0, canvas.width, canvas.height);

    bundle.candidates.forEach((cand, rank) => {
      const staged = this.session.staged.some((s) => s.detection_id === cand.id);
      const color = CANDIDATE_COLORS[rank % CANDIDATE_COLORS.length] ?? "#4ade80";
      this.strokeBox(ctx, cand.box, color, staged ? 3 : 1.5, staged ? [] : [6, 4]);
      const c = imageToCanvas(cand.box, this.scale);
      ctx.fillStyle = color;
      ctx.font = "11px sans-serif";
      ctx.fillText(`#${rank + 1} ${cand.label} ${cand.confidence.toFixed(2)}`, c.x + 2, c.y - 3);
    });

    for (const item of this.session.staged) {
      if (item.detection_id === undefined) {
        this.strokeBox(ctx, item.box, "#ffffff", 2, []);
      }
    }

    if (this.drag) {
      const box = normalizeDrag(this.drag.x0, this.drag.y0, this.drag.x1, this.drag.y1);
      ctx.strokeStyle = "#ffffff";
      ctx.setLineDash([3, 3]);
      ctx.lineWidth = 1;
      ctx.strokeRect(box.x, box.y, box.w, box.h);
      ctx.setLineDash([]);
    }
  }

  private strokeBox(
    ctx: CanvasRenderingContext2D,
    box: Box,
    color: string,
    width: number,
    dash: number[],
  ): void {
    const c = imageToCanvas(box, this.scale);
    ctx.strokeStyle = color;
    ctx.lineWidth = width;
    ctx.setLineDash(dash);
    ctx.strokeRect(c.x, c.y, c.w, c.h);
    ctx.setLineDash([]);
  }

  private sidePane(): HTMLElement {
    const pane = document.createElement("div");
    pane.className = "side-pane";
    pane.append(this.candidateList(), this.stagedList(), this.historyPanel());
    return pane;
  }

  private candidateList(): HTMLElement {
    const bundle = this.session.bundle;
    const wrap = document.createElement("div");
    wrap.className = "panel";
    const title = document.createElement("h3");
    title.textContent = "Candidates";
    wrap.append(title);
    const list = document.createElement("ol");
    for (const cand of bundle?.candidates ?? []) {
      const li = document.createElement("li");
      const btn = this.button(
        `${cand.label} (${cand.confidence.toFixed(2)})`,
        "stage this detector box",
        () => this.stageCandidate(cand),
      );
      btn.className = "candidate-btn";
      li.append(btn);
      list.append(li);
    }
    if (!bundle?.candidates.length) {
      const empty = document.createElement("p");
      empty.className = "muted";
      empty.textContent = "no detections - drag on the frame to draw a box";
      wrap.append(empty);
    }
    wrap.append(list);
    return wrap;
  }

  private labelOptions(): string[] {
    const tags = this.session.bundle?.audio_tags ?? [];
    const labels = tags.map((t) => t.label);
    return labels.length ? labels : ["unknown"];
  }

  private stagedList(): HTMLElement {
    const wrap = document.createElement("div");
    wrap.className = "panel";
    const title = document.createElement("h3");
    title.textContent = "Staged boxes";
    wrap.append(title);
    this.session.staged.forEach((item, idx) => {
      const row = document.createElement("div");
      row.className = "staged-row";
      const source = item.detection_id !== undefined ? `det ${item.detection_id}` : "custom";
      row.append(this.textSpan(`${source} @ (${item.box.x.toFixed(0)},${item.box.y.toFixed(0)})`, "staged-meta"));
      row.append(
        this.button(item.sound_label, "pick what this box sounds like", (): void => {
          this.openLabelPicker(row, idx);
        }),
        this.button("remove", "drop this box", () => {
          this.session.removeStaged(idx);
          this.render();
        }),
      );
      wrap.append(row);
    });
    if (!this.session.staged.length) {
      const empty = document.createElement("p");
      empty.className = "muted";
      empty.textContent = "nothing staged";
      wrap.append(empty);
    }
    return wrap;
  }

  private openLabelPicker(anchor: HTMLElement, index: number): void {
    this.labelPanel?.remove();
    const panel = document.createElement("div");
    panel.className = "label-picker";
    this.labelPanel = panel;
    const tags = this.session.bundle?.audio_tags ?? [];
    const options = tags.length
      ? tags
      : this.labelOptions().map((label) => ({ label, confidence: 0 }));
    for (const tag of options) {
      panel.append(
        this.button(
          tag.confidence ? `${tag.label} (${tag.confidence.toFixed(2)})` : tag.label,
          "use this sound label",
          () => {
            this.session.setLabel(index, tag.label);
            panel.remove();
            this.labelPanel = null;
            this.render();
          },
        ),
      );
    }
    document.body.append(panel);
    const rect = anchor.getBoundingClientRect();
    // Position only after the panel has a measured size, so the clamp works.
    const place = clampPanel(
      rect.left,
      rect.bottom + 4,
      panel.offsetWidth || 180,
      panel.offsetHeight || 120,
      window.innerWidth,
      window.innerHeight,
    );
    panel.style.left = `${place.left}px`;
    panel.style.top = `${place.top}px`;
  }

  private historyPanel(): HTMLElement {
    const wrap = document.createElement("div");
    wrap.className = "panel";
    const title = document.createElement("h3");
    title.textContent = "Session";
    wrap.append(title);
    const meta = document.createElement("p");
    meta.className = "muted";
    const bundle = this.session.bundle;
    meta.textContent =
      `session ${this.session.sessionId} - revision ${this.session.revision}` +
      (bundle?.pending !== null && bundle?.pending !== undefined
        ? ` - pending frame ${bundle.pending}`
        : " - nothing pending");
    wrap.append(meta);
    const list = document.createElement("ul");
    list.className = "history";
    for (const line of this.session.history.slice(-12).reverse()) {
      const li = document.createElement("li");
      li.textContent = line;
      list.append(li);
    }
    wrap.append(list);
    const hint = document.createElement("p");
    hint.className = "muted";
    hint.textContent = "keys: s save, n next label, p preview next, d confirm, r replay audio, Del clear";
    wrap.append(hint);
    return wrap;
  }
}
