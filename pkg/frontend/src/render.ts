import { Box, handleAnchor, HANDLE_IDS, Pt } from "./geometry.js";
import type { CanvasBox } from "./store.js";
import type { Viewport } from "./viewport.js";

/** One colour per palette slot; the service declares at most five. */
export const CATEGORY_COLORS = [
  "#22c55e", // 1 green
  "#eab308", // 2 yellow
  "#3b82f6", // 3 blue
  "#ec4899", // 4 pink
  "#14b8a6", // 5 teal
] as const;

export function categoryColor(category: number): string {
  return CATEGORY_COLORS[(category - 1) % CATEGORY_COLORS.length]!;
}

const HANDLE_SIZE = 7; // screen px

function screenRect(vp: Viewport, b: Box): [number, number, number, number] {
  const o = vp.imageToScreen({ x: b.x, y: b.y });
  return [o.x, o.y, b.w * vp.scale, b.h * vp.scale];
}

/** Stroke the annotation boxes in screen space: crisp lines at any zoom. */
export function drawBoxes(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  boxes: readonly CanvasBox[],
  selectedId: number | null,
  draft: Box | null,
): void {
  for (const entry of boxes) {
    const [x, y, w, h] = screenRect(vp, entry.box);
    const selected = entry.id === selectedId;
    ctx.strokeStyle = categoryColor(entry.category);
    ctx.lineWidth = selected ? 2.5 : 1.5;
    ctx.strokeRect(x, y, w, h);
    if (selected) {
      ctx.fillStyle = ctx.strokeStyle;
      for (const id of HANDLE_IDS) {
        const a = vp.imageToScreen(handleAnchor(entry.box, id));
        ctx.fillRect(a.x - HANDLE_SIZE / 2, a.y - HANDLE_SIZE / 2,
          HANDLE_SIZE, HANDLE_SIZE);
      }
    }
  }
  if (draft) {
    const [x, y, w, h] = screenRect(vp, draft);
    ctx.save();
    ctx.setLineDash([5, 4]);
    ctx.strokeStyle = "#f8fafc";
    ctx.lineWidth = 1;
    ctx.strokeRect(x, y, w, h);
    ctx.restore();
  }
}

/**
 * Full-height/width hairlines through a sub-pixel image point, with the
 * coordinate printed beside the intersection.
 */
export function drawCrosshair(
  ctx: CanvasRenderingContext2D,
  vp: Viewport,
  p: Pt,
  viewW: number,
  viewH: number,
  color: string,
  confirmed: boolean,
): void {
  const s = vp.imageToScreen(p);
  ctx.save();
  ctx.strokeStyle = color;
  ctx.lineWidth = 1;
  ctx.beginPath();
  ctx.moveTo(s.x, 0);
  ctx.lineTo(s.x, viewH);
  ctx.moveTo(0, s.y);
  ctx.lineTo(viewW, s.y);
  ctx.stroke();
  ctx.beginPath();
  ctx.arc(s.x, s.y, 9, 0, Math.PI * 2);
  ctx.stroke();
  ctx.fillStyle = color;
  ctx.font = "12px ui-monospace, monospace";
  const label = `${p.x.toFixed(2)}, ${p.y.toFixed(2)}`
    + (confirmed ? " ✓" : "");
  ctx.fillText(label, s.x + 12, s.y - 8);
  ctx.restore();
}
