import type { Box, Candidate } from "./types.js";

/** Turn a raw drag (any corner to any corner) into an origin+size rect. */
export function normalizeDrag(x0: number, y0: number, x1: number, y1: number): Box {
  return {
    x: Math.min(x0, x1),
    y: Math.min(y0, y1),
    w: Math.abs(x1 - x0),
    h: Math.abs(y1 - y0),
  };
}

/**
 * Client-side guard before a custom box is staged: degenerate boxes
 * (w <= 0 or h <= 0) never reach the server.
 */
export function validBox(box: Box): boolean {
  return box.w > 0 && box.h > 0 && Number.isFinite(box.x) && Number.isFinite(box.y);
}

/** Clamp a box to image bounds, preserving as much area as possible. */
export function clampBoxToImage(box: Box, width: number, height: number): Box {
  const x = Math.max(0, Math.min(box.x, width));
  const y = Math.max(0, Math.min(box.y, height));
  return {
    x,
    y,
    w: Math.max(0, Math.min(box.w, width - x)),
    h: Math.max(0, Math.min(box.h, height - y)),
  };
}

/** Map a canvas-space point into image space given the canvas scale. */
export function canvasToImage(px: number, py: number, scale: number): { x: number; y: number } {
  return { x: px / scale, y: py / scale };
}

/** Map an image-space box into canvas space for drawing. */
export function imageToCanvas(box: Box, scale: number): Box {
  return { x: box.x * scale, y: box.y * scale, w: box.w * scale, h: box.h * scale };
}

export function boxContains(box: Box, x: number, y: number): boolean {
  return x >= box.x && x <= box.x + box.w && y >= box.y && y <= box.y + box.h;
}

/**
 * Candidate under an image-space point. Candidates arrive rank-ordered
 * (best first) so the first hit wins; ties go to the higher-ranked one.
 */
export function hitCandidate(candidates: Candidate[], x: number, y: number): Candidate | null {
  for (const cand of candidates) {
    if (boxContains(cand.box, x, y)) return cand;
  }
  return null;
}

export interface PanelPlacement {
  left: number;
  top: number;
}

/**
 * Place a floating panel near an anchor point but fully inside the
 * viewport, so label pickers next to edge boxes never render off-screen.
 */
export function clampPanel(
  anchorX: number,
  anchorY: number,
  panelW: number,
  panelH: number,
  viewportW: number,
  viewportH: number,
): PanelPlacement {
  const left = Math.max(0, Math.min(anchorX, viewportW - panelW));
  const top = Math.max(0, Math.min(anchorY, viewportH - panelH));
  return { left, top };
}

/** Scale that fits an image into a target area without upscaling past 4x. */
export function fitScale(
  imageW: number,
  imageH: number,
  maxW: number,
  maxH: number,
): number {
  const s = Math.min(maxW / imageW, maxH / imageH);
  return Math.min(s, 4);
}
