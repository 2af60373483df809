import { Box, containsPoint, Pt } from "./geometry.js";
import type { PreviewDoc } from "./types.js";
import type { Viewport } from "./viewport.js";

/** One successfully projected box in orthomosaic pixels, with its match. */
export interface OverlayProjected {
  index: number;
  detId: number;
  box: Box;
  /** IoU against the best manual box, or null when nothing matched. */
  iou: number | null;
  manualIndex: number | null;
}

export interface OverlayModel {
  imageId: number;
  projected: OverlayProjected[];
  manual: Box[];
  /** Projection attempts that produced no ortho box, by failure status. */
  failures: { detId: number; status: string }[];
}

export interface OverlayLayers {
  projected: boolean;
  manual: boolean;
}

function toBox(t: [number, number, number, number]): Box {
  return { x: t[0], y: t[1], w: t[2], h: t[3] };
}

/** Reshape a projection-preview response for rendering and hit-testing. */
export function overlayModel(doc: PreviewDoc): OverlayModel {
  const byProjected = new Map<number, { manual: number; iou: number }>();
  for (const pair of doc.pairs ?? []) {
    byProjected.set(pair.projected, { manual: pair.manual, iou: pair.iou });
  }
  const projected: OverlayProjected[] = [];
  const failures: { detId: number; status: string }[] = [];
  doc.projected.forEach((item, index) => {
    if (item.ortho_bbox) {
      const pair = byProjected.get(index);
      projected.push({
        index,
        detId: item.det_id,
        box: toBox(item.ortho_bbox),
        iou: pair ? pair.iou : null,
        manualIndex: pair ? pair.manual : null,
      });
    } else {
      failures.push({ detId: item.det_id, status: item.status });
    }
  });
  return {
    imageId: doc.image_id,
    projected,
    manual: (doc.manual ?? []).map(toBox),
    failures,
  };
}

/** Structural subset of CanvasRenderingContext2D the renderer needs. */
export interface StrokeSurface {
  beginPath(): void;
  rect(x: number, y: number, w: number, h: number): void;
  stroke(): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
}

export const PROJECTED_COLOR = "#3b82f6"; // blue
export const MANUAL_COLOR = "#ef4444"; // red

/**
 * Stroke every visible box in screen space (crisp lines at any zoom).
 * Each layer is a single batched path, so a thousand boxes stay well
 * inside a frame budget.
 */
export function renderOverlay(
  ctx: StrokeSurface,
  vp: Viewport,
  model: OverlayModel,
  layers: OverlayLayers,
): void {
  const strokeLayer = (boxes: readonly Box[], color: string) => {
    if (boxes.length === 0) return;
    ctx.beginPath();
    for (const b of boxes) {
      const o = vp.imageToScreen({ x: b.x, y: b.y });
      ctx.rect(o.x, o.y, b.w * vp.scale, b.h * vp.scale);
    }
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.5;
    ctx.stroke();
  };
  if (layers.manual) strokeLayer(model.manual, MANUAL_COLOR);
  if (layers.projected) {
    strokeLayer(model.projected.map((p) => p.box), PROJECTED_COLOR);
  }
}

/**
 * Tooltip for the topmost visible box under a screen point. Projected
 * boxes report their pair IoU; manual boxes are checked only when the
 * projected layer yields nothing.
 */
export function tooltipAt(
  screen: Pt,
  vp: Viewport,
  model: OverlayModel,
  layers: OverlayLayers,
): string | null {
  const p = vp.screenToImage(screen);
  if (layers.projected) {
    for (let i = model.projected.length - 1; i >= 0; i--) {
      const item = model.projected[i]!;
      if (containsPoint(item.box, p)) {
        return item.iou === null
          ? `det ${item.detId} — unmatched`
          : `det ${item.detId} — IoU ${item.iou.toFixed(3)}`;
      }
    }
  }
  if (layers.manual) {
    for (let i = model.manual.length - 1; i >= 0; i--) {
      if (containsPoint(model.manual[i]!, p)) return `manual ${i + 1}`;
    }
  }
  return null;
}
