/** Box math in image-frame coordinates.
 *
 * Coordinates follow the service convention: pixel (0, 0) addresses the
 * *centre* of the top-left pixel, so the visible extent of a width x height
 * image is [-0.5, width - 0.5] x [-0.5, height - 0.5]. A box is stored as
 * its min corner plus positive width/height on that continuous axis.
 */

export interface Pt {
  x: number;
  y: number;
}

export interface Box {
  x: number;
  y: number;
  w: number;
  h: number;
}

/** Sub-pixel quantum for everything we ship to the API. */
export const COORD_QUANTUM = 0.01;

export type HandleId = "nw" | "n" | "ne" | "e" | "se" | "s" | "sw" | "w";

export const HANDLE_IDS: readonly HandleId[] = [
  "nw", "n", "ne", "e", "se", "s", "sw", "w",
];

/** Axis-aligned box spanned by two drag corners, in any order. */
export function normalized(a: Pt, b: Pt): Box {
  const x = Math.min(a.x, b.x);
  const y = Math.min(a.y, b.y);
  return { x, y, w: Math.abs(a.x - b.x), h: Math.abs(a.y - b.y) };
}

export function roundBox(b: Box, quantum: number = COORD_QUANTUM): Box {
  // divide by the reciprocal rather than multiply by the quantum, so the
  // result is the double closest to the decimal (9.12, not 9.120000…001)
  const inv = 1 / quantum;
  const q = (v: number) => Math.round(v * inv) / inv;
  return { x: q(b.x), y: q(b.y), w: q(b.w), h: q(b.h) };
}

/**
 * Intersect a box with the image extent. A box that lies entirely outside
 * collapses to zero width or height; callers treat those as invalid.
 */
export function clampToImage(b: Box, width: number, height: number): Box {
  const x0 = Math.max(b.x, -0.5);
  const y0 = Math.max(b.y, -0.5);
  const x1 = Math.min(b.x + b.w, width - 0.5);
  const y1 = Math.min(b.y + b.h, height - 0.5);
  return { x: x0, y: y0, w: Math.max(0, x1 - x0), h: Math.max(0, y1 - y0) };
}

export function containsPoint(b: Box, p: Pt): boolean {
  return p.x >= b.x && p.x <= b.x + b.w && p.y >= b.y && p.y <= b.y + b.h;
}

export function iou(a: Box, b: Box): number {
  const ix = Math.min(a.x + a.w, b.x + b.w) - Math.max(a.x, b.x);
  const iy = Math.min(a.y + a.h, b.y + b.h) - Math.max(a.y, b.y);
  if (ix <= 0 || iy <= 0) return 0;
  const inter = ix * iy;
  const union = a.w * a.h + b.w * b.h - inter;
  return union > 0 ? inter / union : 0;
}

/** Anchor point of each resize handle (corners and edge midpoints). */
export function handleAnchor(b: Box, id: HandleId): Pt {
  const cx = b.x + b.w / 2;
  const cy = b.y + b.h / 2;
  switch (id) {
    case "nw": return { x: b.x, y: b.y };
    case "n": return { x: cx, y: b.y };
    case "ne": return { x: b.x + b.w, y: b.y };
    case "e": return { x: b.x + b.w, y: cy };
    case "se": return { x: b.x + b.w, y: b.y + b.h };
    case "s": return { x: cx, y: b.y + b.h };
    case "sw": return { x: b.x, y: b.y + b.h };
    case "w": return { x: b.x, y: cy };
  }
}

/**
 * Box produced by dragging `handle` of `orig` to point `p`. Corner handles
 * keep the opposite corner fixed; edge handles move one side only. Dragging
 * past the fixed side flips the box, which normalisation absorbs.
 */
export function resized(orig: Box, handle: HandleId, p: Pt): Box {
  const x0 = orig.x;
  const y0 = orig.y;
  const x1 = orig.x + orig.w;
  const y1 = orig.y + orig.h;
  const west = handle.includes("w");
  const east = handle.includes("e");
  const north = handle.includes("n");
  const south = handle.includes("s");
  const a: Pt = { x: west ? p.x : x0, y: north ? p.y : y0 };
  const b: Pt = { x: east ? p.x : x1, y: south ? p.y : y1 };
  return normalized(a, b);
}
