import type { ApiClient } from "../api.js";
import { fitScale, imageToCanvas } from "../geometry.js";
import type { Playback, SessionStats, Thumbnail } from "../types.js";

export interface Badge {
  text: string;
  cls: string;
  warning: boolean;
}

/** Map a frame status onto the thumbnail badge the grid shows. */
export function badgeFor(status: string, warning = false): Badge {
  switch (status) {
    case "human":
      return { text: "human", cls: "badge-human", warning };
    case "auto":
      return { text: "auto", cls: "badge-auto", warning };
    case "auto_modified":
      return { text: "modified", cls: "badge-modified", warning };
    case "skipped_audio_gate":
      return { text: "skipped", cls: "badge-skipped", warning: true };
    case "unannotated":
      return { text: "todo", cls: "badge-todo", warning };
    default:
      return { text: status, cls: "badge-unknown", warning };
  }
}

const MAX_PLAYBACK_W = 720;
const MAX_PLAYBACK_H = 540;

/**
 * Review screen: a badge-annotated thumbnail grid plus a playback loop that
 * renders every frame's boxes with translucent label chips at project speed.
 */
export class ReviewView {
  private root: HTMLElement | null = null;
  private playback: Playback | null = null;
  private playTimer: ReturnType<typeof setInterval> | null = null;
  private playIndex = 0;
  private images: HTMLImageElement[] = [];
  private canvas: HTMLCanvasElement | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly sessionId: string,
    private readonly onMoveTo: (frame: number) => void,
  ) {}

  async mount(root: HTMLElement): Promise<void> {
    this.root = root;
    root.textContent = "loading review...";
    const [thumbnails, playback, stats] = await Promise.all([
      this.api.thumbnails(this.sessionId),
      this.api.playback(this.sessionId),
      this.api.stats(this.sessionId),
    ]);
    this.playback = playback;
    this.images = playback.frames.map((frame) => {
      const img = new Image();
      img.src = this.api.mediaUrl(frame.image_url);
      return img;
    });
    this.render(thumbnails, stats);
  }

  unmount(): void {
    this.stop();
    this.root = null;
  }

  private render(thumbnails: Thumbnail[], stats: SessionStats): void {
    const root = this.root;
    if (!root) return;
    root.innerHTML = "";

    const statsBar = document.createElement("div");
    statsBar.className = "stats-bar";
    const pct = (x: number) => `${(100 * x).toFixed(1)}%`;
    statsBar.textContent =
      `${stats.n_frames} frames - ${stats.manual_count} human, ` +
      `${stats.auto_count} auto, ${stats.auto_modified_count} modified, ` +
      `${stats.skipped_count} skipped - automation ${pct(stats.automation_fraction)}` +
      (stats.mean_ciou !== null ? ` - mean cIoU ${stats.mean_ciou.toFixed(4)}` : "");
    root.append(statsBar);

    root.append(this.playbackPane());

    const grid = document.createElement("div");
    grid.className = "thumb-grid";
    for (const thumb of thumbnails) {
      grid.append(this.thumbCell(thumb));
    }
    root.append(grid);
  }

  private thumbCell(thumb: Thumbnail): HTMLElement {
    const cell = document.createElement("figure");
    cell.className = "thumb-cell";
    const img = document.createElement("img");
    img.src = this.api.mediaUrl(thumb.image_url);
    img.alt = `frame ${thumb.frame}`;
    cell.append(img);

    const badge = badgeFor(thumb.status, thumb.warning);
    const tag = document.createElement("figcaption");
    tag.className = `badge ${badge.cls}`;
    tag.textContent = badge.warning ? `⚠ ${badge.text}` : badge.text;
    cell.append(tag);

    const idx = document.createElement("span");
    idx.className = "thumb-index";
    idx.textContent = String(thumb.frame);
    cell.append(idx);

    const move = document.createElement("button");
    move.className = "thumb-move";
    move.textContent = "Move To";
    move.title = "jump back to annotating this frame";
    move.addEventListener("click", () => this.onMoveTo(thumb.frame));
    cell.append(move);
    return cell;
  }

  private playbackPane(): HTMLElement {
    const pane = document.createElement("div");
    pane.className = "playback-pane";
    const canvas = document.createElement("canvas");
    canvas.className = "playback-canvas";
    this.canvas = canvas;
    pane.append(canvas);

    const controls = document.createElement("div");
    controls.className = "playback-controls";
    const playBtn = document.createElement("button");
    playBtn.textContent = "Play";
    playBtn.addEventListener("click", () => {
      if (this.playTimer) {
        this.stop();
        playBtn.textContent = "Play";
      } else {
        this.start();
        playBtn.textContent = "Pause";
      }
    });
    const fpsNote = document.createElement("span");
    fpsNote.className = "muted";
    fpsNote.textContent = this.playback ? `${this.playback.fps} fps` : "";
    controls.append(playBtn, fpsNote);
    pane.append(controls);
    this.drawFrame(0);
    return pane;
  }

  private start(): void {
    const playback = this.playback;
    if (!playback || this.playTimer) return;
    // Drive the loop at the clip's native rate so review matches real time.
    const periodMs = 1000 / playback.fps;
    this.playTimer = setInterval(() => {
      this.playIndex = (this.playIndex + 1) % playback.frames.length;
      this.drawFrame(this.playIndex);
    }, periodMs);
  }

  private stop(): void {
    if (this.playTimer) clearInterval(this.playTimer);
    this.playTimer = null;
  }

  private drawFrame(index: number): void {
    const playback = this.playback;
    const canvas = this.canvas;
    if (!playback || !canvas) return;
    const frame = playback.frames[index];
    const img = this.images[index];
    if (!frame || !img) return;
    const ctx = canvas.getContext("2d");
    if (!ctx) return;

    const doDraw = () => {
      const scale = fitScale(img.naturalWidth, img.naturalHeight, MAX_PLAYBACK_W, MAX_PLAYBACK_H);
      canvas.width = Math.round(img.naturalWidth * scale);
      canvas.height = Math.round(img.naturalHeight * scale);
      ctx.drawImage(img, 0, 0, canvas.width, canvas.height);
      ctx.font = "12px sans-serif";
      for (const item of frame.items) {
        const c = imageToCanvas(item.box, scale);
        ctx.strokeStyle = "#ffffff";
        ctx.lineWidth = 2;
        ctx.strokeRect(c.x, c.y, c.w, c.h);
        const text = item.sound_label;
        const textW = ctx.measureText(text).width + 8;
        const chipY = Math.max(0, c.y - 18);
        ctx.fillStyle = "rgba(255, 255, 255, 0.65)";
        ctx.fillRect(c.x, chipY, textW, 16);
        ctx.fillStyle = "#111111";
        ctx.fillText(text, c.x + 4, chipY + 12);
      }
      ctx.fillStyle = "rgba(255, 255, 255, 0.65)";
      ctx.fillRect(4, canvas.height - 20, 110, 16);
      ctx.fillStyle = "#111111";
      ctx.fillText(`frame ${frame.frame} ${frame.status}`, 8, canvas.height - 8);
    };

    if (img.complete && img.naturalWidth > 0) doDraw();
    else img.onload = doDraw;
  }
}
