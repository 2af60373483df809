import { describe, expect, it } from "vitest";
import {
  MANUAL_COLOR,
  OverlayLayers,
  overlayModel,
  PROJECTED_COLOR,
  renderOverlay,
  StrokeSurface,
  tooltipAt,
} from "../src/overlay.js";
import type { BBoxTuple, PreviewDoc } from "../src/types.js";
import { Viewport } from "../src/viewport.js";
import { rng, uniform } from "./helpers.js";

const BOTH: OverlayLayers = { projected: true, manual: true };

function doc(partial: Partial<PreviewDoc>): PreviewDoc {
  return { image_id: 1, projected: [], ...partial };
}

/** Records calls instead of drawing, to count path-batching work. */
class CountingSurface implements StrokeSurface {
  beginPaths = 0;
  rects = 0;
  strokes = 0;
  styles: (string | CanvasGradient | CanvasPattern)[] = [];
  strokeStyle: string | CanvasGradient | CanvasPattern = "";
  lineWidth = 0;
  beginPath(): void {
    this.beginPaths += 1;
  }
  rect(): void {
    this.rects += 1;
  }
  stroke(): void {
    this.strokes += 1;
    this.styles.push(this.strokeStyle);
  }
}

describe("overlayModel", () => {
  const response = doc({
    image_id: 7,
    projected: [
      {
        det_id: 11,
        status: "ok",
        src_bbox: [0, 0, 10, 10],
        ortho_bbox: [100, 200, 30, 40],
      },
      { det_id: 12, status: "no_dsm_intersection", src_bbox: [5, 5, 4, 4] },
      {
        det_id: 13,
        status: "ok",
        src_bbox: [20, 20, 8, 8],
        ortho_bbox: [300, 310, 20, 25],
      },
    ],
    manual: [[100, 200, 30, 40]],
    pairs: [{ projected: 0, manual: 0, iou: 1.0 }],
  });

  it("splits successes from failures and joins pairs by index", () => {
    const model = overlayModel(response);
    expect(model.imageId).toBe(7);
    expect(model.projected).toEqual([
      {
        index: 0,
        detId: 11,
        box: { x: 100, y: 200, w: 30, h: 40 },
        iou: 1.0,
        manualIndex: 0,
      },
      {
        index: 2,
        detId: 13,
        box: { x: 300, y: 310, w: 20, h: 25 },
        iou: null,
        manualIndex: null,
      },
    ]);
    expect(model.manual).toEqual([{ x: 100, y: 200, w: 30, h: 40 }]);
    expect(model.failures)
      .toEqual([{ detId: 12, status: "no_dsm_intersection" }]);
  });

  it("tolerates responses without manual boxes or pairs", () => {
    const model = overlayModel(doc({
      projected: [{
        det_id: 1,
        status: "ok",
        src_bbox: [0, 0, 1, 1],
        ortho_bbox: [0, 0, 5, 5],
      }],
    }));
    expect(model.manual).toEqual([]);
    expect(model.projected[0]!.iou).toBeNull();
  });
});

describe("tooltipAt", () => {
  const vp = new Viewport();
  const model = overlayModel(doc({
    projected: [
      {
        det_id: 11,
        status: "ok",
        src_bbox: [0, 0, 1, 1],
        ortho_bbox: [10, 10, 20, 20],
      },
      { det_id: 12, status: "ok", src_bbox: [0, 0, 1, 1], ortho_bbox: [50, 10, 20, 20] },
    ],
    manual: [[10, 10, 20, 20]],
    pairs: [{ projected: 0, manual: 0, iou: 0.8571 }],
  }));

  it("reports the pair IoU for a matched projected box", () => {
    const text = tooltipAt(vp.imageToScreen({ x: 15, y: 15 }), vp, model, BOTH);
    expect(text).toBe("det 11 — IoU 0.857");
  });

  it("labels an unmatched projected box", () => {
    const text = tooltipAt(vp.imageToScreen({ x: 55, y: 15 }), vp, model, BOTH);
    expect(text).toBe("det 12 — unmatched");
  });

  it("falls back to manual boxes when the projected layer is hidden", () => {
    const layers: OverlayLayers = { projected: false, manual: true };
    const text = tooltipAt(
      vp.imageToScreen({ x: 15, y: 15 }),
      vp,
      model,
      layers,
    );
    expect(text).toBe("manual 1");
  });

  it("returns null away from every box", () => {
    expect(tooltipAt(vp.imageToScreen({ x: 500, y: 500 }), vp, model, BOTH))
      .toBeNull();
  });

  it("shows IoU 1.000 on every box of a perfectly aligned scene", () => {
    const boxes: BBoxTuple[] = [
      [0, 0, 10, 10],
      [40, 0, 10, 10],
      [0, 40, 10, 10],
    ];
    const perfect = overlayModel(doc({
      projected: boxes.map((b, i) => ({
        det_id: i + 1,
        status: "ok",
        src_bbox: [0, 0, 1, 1] as BBoxTuple,
        ortho_bbox: b,
      })),
      manual: boxes,
      pairs: boxes.map((_, i) => ({ projected: i, manual: i, iou: 1.0 })),
    }));
    for (const item of perfect.projected) {
      const center = {
        x: item.box.x + item.box.w / 2,
        y: item.box.y + item.box.h / 2,
      };
      const text = tooltipAt(vp.imageToScreen(center), vp, perfect, BOTH);
      expect(text).toBe(`det ${item.detId} — IoU 1.000`);
    }
  });
});

describe("renderOverlay", () => {
  function randomScene(count: number): ReturnType<typeof overlayModel> {
    const r = rng(20240815);
    const box = (): BBoxTuple => [
      uniform(r, 0, 4000),
      uniform(r, 0, 3000),
      uniform(r, 5, 60),
      uniform(r, 5, 60),
    ];
    const manual: BBoxTuple[] = [];
    const projected = [];
    for (let i = 0; i < count; i++) {
      const b = box();
      projected.push({
        det_id: i + 1,
        status: "ok",
        src_bbox: [0, 0, 1, 1] as BBoxTuple,
        ortho_bbox: b,
      });
      manual.push(b);
    }
    return overlayModel(doc({ projected, manual }));
  }

  it("batches each layer into a single stroked path", () => {
    const model = randomScene(50);
    const ctx = new CountingSurface();
    const vp = new Viewport();
    renderOverlay(ctx, vp, model, BOTH);
    expect(ctx.beginPaths).toBe(2);
    expect(ctx.rects).toBe(100); // 50 per layer
    expect(ctx.strokes).toBe(2);
    expect(ctx.styles).toEqual([MANUAL_COLOR, PROJECTED_COLOR]);
  });

  it("draws nothing for hidden layers and leaves the viewport alone", () => {
    const model = randomScene(10);
    const ctx = new CountingSurface();
    const vp = new Viewport();
    vp.scale = 3;
    vp.tx = 12;
    vp.ty = -7;
    renderOverlay(ctx, vp, model, { projected: false, manual: false });
    expect(ctx.beginPaths).toBe(0);
    expect(ctx.rects).toBe(0);
    expect(ctx.strokes).toBe(0);

    renderOverlay(ctx, vp, model, { projected: true, manual: false });
    expect(ctx.styles).toEqual([PROJECTED_COLOR]);
    expect([vp.scale, vp.tx, vp.ty]).toEqual([3, 12, -7]);
  });

  it("keeps a 1000-box scene under the frame budget", () => {
    const model = randomScene(1000);
    const ctx = new CountingSurface();
    const vp = new Viewport();
    vp.scale = 0.3;
    const frames = 50;
    const start = performance.now();
    for (let i = 0; i < frames; i++) {
      renderOverlay(ctx, vp, model, BOTH);
    }
    const perFrame = (performance.now() - start) / frames;
    expect(ctx.rects).toBe(2000 * frames);
    expect(perFrame).toBeLessThan(100);
  });
});
