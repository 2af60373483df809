import { describe, expect, it } from "vitest";
import {
  clampToImage,
  containsPoint,
  handleAnchor,
  iou,
  normalized,
  resized,
  roundBox,
} from "../src/geometry.js";

describe("normalized", () => {
  it("orders corners dragged in any direction", () => {
    const want = { x: 3, y: 4, w: 7, h: 2 };
    expect(normalized({ x: 3, y: 4 }, { x: 10, y: 6 })).toEqual(want);
    expect(normalized({ x: 10, y: 6 }, { x: 3, y: 4 })).toEqual(want);
    expect(normalized({ x: 10, y: 4 }, { x: 3, y: 6 })).toEqual(want);
  });
});

describe("iou", () => {
  it("half-shifted squares: inter 50, union 150 -> 1/3", () => {
    const a = { x: 0, y: 0, w: 10, h: 10 };
    const b = { x: 5, y: 0, w: 10, h: 10 };
    expect(iou(a, b)).toBeCloseTo(1 / 3, 12);
  });

  it("identical boxes give exactly 1", () => {
    const a = { x: 2.5, y: -0.5, w: 8, h: 4 };
    expect(iou(a, { ...a })).toBe(1);
  });

  it("disjoint and touching boxes give 0", () => {
    const a = { x: 0, y: 0, w: 10, h: 10 };
    expect(iou(a, { x: 20, y: 0, w: 5, h: 5 })).toBe(0);
    expect(iou(a, { x: 10, y: 0, w: 5, h: 5 })).toBe(0); // shared edge only
  });
});

describe("clampToImage", () => {
  it("trims overhang to the [-0.5, dim-0.5] extent", () => {
    // 20x20 image: left/top clamp to -0.5, right edge of box at 7 stays
    expect(clampToImage({ x: -3, y: -3, w: 10, h: 10 }, 20, 20))
      .toEqual({ x: -0.5, y: -0.5, w: 7.5, h: 7.5 });
  });

  it("collapses a fully outside box to zero size", () => {
    const c = clampToImage({ x: 30, y: 5, w: 10, h: 10 }, 20, 20);
    expect(c.w).toBe(0);
  });

  it("keeps an interior box untouched", () => {
    const b = { x: 1.25, y: 2.5, w: 3, h: 4 };
    expect(clampToImage(b, 20, 20)).toEqual(b);
  });
});

describe("roundBox", () => {
  it("quantizes to 0.01 px", () => {
    expect(roundBox({ x: 10.004, y: 5.996, w: 20.0049, h: 9.123 }))
      .toEqual({ x: 10.0, y: 6.0, w: 20.0, h: 9.12 });
  });
});

describe("containsPoint", () => {
  it("includes the boundary", () => {
    const b = { x: 0, y: 0, w: 10, h: 5 };
    expect(containsPoint(b, { x: 0, y: 0 })).toBe(true);
    expect(containsPoint(b, { x: 10, y: 5 })).toBe(true);
    expect(containsPoint(b, { x: 10.01, y: 5 })).toBe(false);
  });
});

describe("handleAnchor", () => {
  it("corners and edge midpoints of (10,20,30,40)", () => {
    const b = { x: 10, y: 20, w: 30, h: 40 };
    expect(handleAnchor(b, "nw")).toEqual({ x: 10, y: 20 });
    expect(handleAnchor(b, "se")).toEqual({ x: 40, y: 60 });
    expect(handleAnchor(b, "n")).toEqual({ x: 25, y: 20 });
    expect(handleAnchor(b, "e")).toEqual({ x: 40, y: 40 });
  });
});

describe("resized", () => {
  const orig = { x: 10, y: 10, w: 20, h: 10 };

  it("east edge follows the cursor", () => {
    expect(resized(orig, "e", { x: 35, y: 99 }))
      .toEqual({ x: 10, y: 10, w: 25, h: 10 });
  });

  it("north edge keeps the x span", () => {
    expect(resized(orig, "n", { x: 0, y: 25 }))
      .toEqual({ x: 10, y: 20, w: 20, h: 5 });
  });

  it("corner drag keeps the opposite corner fixed", () => {
    expect(resized(orig, "se", { x: 50, y: 40 }))
      .toEqual({ x: 10, y: 10, w: 40, h: 30 });
    expect(resized(orig, "nw", { x: 5, y: 5 }))
      .toEqual({ x: 5, y: 5, w: 25, h: 15 });
  });

  it("dragging past the fixed side flips instead of going negative", () => {
    // west edge dragged 5 px past the east edge at x=30
    expect(resized(orig, "w", { x: 35, y: 0 }))
      .toEqual({ x: 30, y: 10, w: 5, h: 10 });
    // se corner dragged above-left of the nw corner
    expect(resized(orig, "se", { x: 5, y: 5 }))
      .toEqual({ x: 5, y: 5, w: 5, h: 5 });
  });
});
