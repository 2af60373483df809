import { beforeEach, describe, expect, it } from "vitest";
import { Api } from "../src/api.js";
import { BoxTool } from "../src/boxtool.js";
import type { Pt } from "../src/geometry.js";
import { AnnotationStore } from "../src/store.js";
import { Viewport } from "../src/viewport.js";
import { FakeBackend, imageEntry } from "./fake_backend.js";

let store: AnnotationStore;
let vp: Viewport;
let tool: BoxTool;

beforeEach(async () => {
  const backend = new FakeBackend([imageEntry(1, 200, 150)]);
  store = new AnnotationStore(new Api("", backend.fetch), 2);
  await store.open(backend.images[0]!);
  vp = new Viewport();
  tool = new BoxTool(store, vp);
});

/** Drive a full drag gesture through screen coordinates. */
function drag(fromImage: Pt, toImage: Pt): void {
  tool.pointerDown(vp.imageToScreen(fromImage));
  tool.pointerMove(vp.imageToScreen({
    x: (fromImage.x + toImage.x) / 2,
    y: (fromImage.y + toImage.y) / 2,
  }));
  tool.pointerMove(vp.imageToScreen(toImage));
  tool.pointerUp();
}

describe("drawing", () => {
  it("stores image-frame coordinates regardless of zoom and pan", () => {
    // the same intended box drawn at 1x, then at a zoomed/panned 4x view
    drag({ x: 10.25, y: 20.5 }, { x: 41.0, y: 60.5 });
    const atOneX = { ...store.boxes[0]!.box };
    expect(atOneX).toEqual({ x: 10.25, y: 20.5, w: 30.75, h: 40.0 });
    store.remove(store.boxes[0]!.id);

    vp.scale = 4;
    vp.tx = 37.3;
    vp.ty = -12.9;
    drag({ x: 10.25, y: 20.5 }, { x: 41.0, y: 60.5 });

    expect(store.boxes).toHaveLength(1);
    // identical to within the 0.01 px quantum — here exactly
    expect(store.boxes[0]!.box).toEqual(atOneX);
  });

  it("uses the active category and selects the new box", () => {
    tool.activeCategory = 2;
    drag({ x: 5, y: 5 }, { x: 25, y: 15 });
    expect(store.boxes[0]!.category).toBe(2);
    expect(store.selectedId).toBe(store.boxes[0]!.id);
    expect(store.dirty).toBe(true);
  });

  it("discards a sub-pixel jitter instead of creating a box", () => {
    drag({ x: 10, y: 10 }, { x: 10.4, y: 10.3 });
    expect(store.boxes).toHaveLength(0);
  });
});

describe("moving", () => {
  it("drags a box by the pointer delta in image units", () => {
    drag({ x: 20, y: 20 }, { x: 40, y: 35 });
    vp.scale = 2; // moving must divide screen deltas by the zoom
    tool.pointerDown(vp.imageToScreen({ x: 30, y: 25 })); // inside the box
    tool.pointerMove(vp.imageToScreen({ x: 36.5, y: 27.25 }));
    tool.pointerUp();
    expect(store.boxes[0]!.box)
      .toEqual({ x: 26.5, y: 22.25, w: 20, h: 15 });
  });

  it("slides along the image edge without shrinking", () => {
    drag({ x: 20, y: 20 }, { x: 40, y: 35 });
    tool.pointerDown(vp.imageToScreen({ x: 30, y: 27 }));
    tool.pointerMove(vp.imageToScreen({ x: 1000, y: 27 }));
    tool.pointerUp();
    // 200 px wide image: extent ends at 199.5, so x = 199.5 - 20
    expect(store.boxes[0]!.box)
      .toEqual({ x: 179.5, y: 20, w: 20, h: 15 });
  });

  it("escape restores the grabbed box", () => {
    drag({ x: 20, y: 20 }, { x: 40, y: 35 });
    tool.pointerDown(vp.imageToScreen({ x: 30, y: 25 }));
    tool.pointerMove(vp.imageToScreen({ x: 90, y: 80 }));
    tool.cancel();
    expect(store.boxes[0]!.box).toEqual({ x: 20, y: 20, w: 20, h: 15 });
    expect(tool.dragging).toBe(false);
  });
});

describe("resizing", () => {
  it("grabs a handle within its screen radius and resizes", () => {
    drag({ x: 20, y: 20 }, { x: 40, y: 35 });
    // se corner is at image (40, 35); 4 screen px off still grabs it
    const corner = vp.imageToScreen({ x: 40, y: 35 });
    tool.pointerDown({ x: corner.x + 4, y: corner.y });
    tool.pointerMove(vp.imageToScreen({ x: 55.5, y: 42.25 }));
    tool.pointerUp();
    expect(store.boxes[0]!.box)
      .toEqual({ x: 20, y: 20, w: 35.5, h: 22.25 });
  });

  it("reports handle and box hits for cursor feedback", () => {
    drag({ x: 20, y: 20 }, { x: 40, y: 35 });
    expect(tool.hover(vp.imageToScreen({ x: 40, y: 35 })))
      .toEqual({ kind: "handle", id: "se" });
    expect(tool.hover(vp.imageToScreen({ x: 30, y: 27 })))
      .toEqual({ kind: "box", id: store.boxes[0]!.id });
    expect(tool.hover(vp.imageToScreen({ x: 150, y: 100 })))
      .toEqual({ kind: "empty" });
  });
});

describe("panning", () => {
  it("moves the viewport, never the boxes", () => {
    drag({ x: 20, y: 20 }, { x: 40, y: 35 });
    const before = { ...store.boxes[0]!.box };
    tool.pointerDown({ x: 100, y: 100 }, { pan: true });
    tool.pointerMove({ x: 130, y: 80 });
    tool.pointerUp();
    expect(vp.tx).toBe(30);
    expect(vp.ty).toBe(-20);
    expect(store.boxes[0]!.box).toEqual(before);
    expect(store.boxes).toHaveLength(1); // pan-release adds no box
  });
});
