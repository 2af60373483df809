import {
  Box,
  handleAnchor,
  HANDLE_IDS,
  HandleId,
  normalized,
  Pt,
  resized,
} from "./geometry.js";
import type { AnnotationStore, CanvasBox } from "./store.js";
import type { Viewport } from "./viewport.js";

/** What the cursor is over, for pointer feedback. */
export type Hover =
  | { kind: "handle"; id: HandleId }
  | { kind: "box"; id: number }
  | { kind: "empty" };

type DragState =
  | { kind: "idle" }
  | { kind: "pan"; last: Pt }
  | { kind: "draw"; anchor: Pt; current: Pt }
  | { kind: "move"; id: number; grab: Pt; orig: Box }
  | { kind: "resize"; id: number; handle: HandleId; orig: Box };

/**
 * Pointer state machine for the annotation canvas. All inputs are
 * screen-frame points; every box mutation goes through the viewport's
 * screen-to-image mapping, so stored coordinates are independent of the
 * current zoom and pan.
 */
export class BoxTool {
  activeCategory = 1;
  private state: DragState = { kind: "idle" };

  constructor(
    private readonly store: AnnotationStore,
    private readonly viewport: Viewport,
    /** Grab radius around resize handles, in screen pixels. */
    private readonly handleRadiusPx = 6,
  ) {}

  get dragging(): boolean {
    return this.state.kind !== "idle";
  }

  /** Rubber-band rectangle while drawing, in image coordinates. */
  get draft(): Box | null {
    return this.state.kind === "draw"
      ? normalized(this.state.anchor, this.state.current)
      : null;
  }

  private handleHit(entry: CanvasBox, screen: Pt): HandleId | null {
    for (const id of HANDLE_IDS) {
      const a = this.viewport.imageToScreen(handleAnchor(entry.box, id));
      if (Math.hypot(a.x - screen.x, a.y - screen.y) <= this.handleRadiusPx) {
        return id;
      }
    }
    return null;
  }

  hover(screen: Pt): Hover {
    const selected = this.store.selected;
    if (selected) {
      const handle = this.handleHit(selected, screen);
      if (handle) return { kind: "handle", id: handle };
    }
    const under = this.store.boxAt(this.viewport.screenToImage(screen));
    return under ? { kind: "box", id: under.id } : { kind: "empty" };
  }

  pointerDown(screen: Pt, opts: { pan?: boolean } = {}): void {
    if (opts.pan) {
      this.state = { kind: "pan", last: screen };
      return;
    }
    const selected = this.store.selected;
    if (selected) {
      const handle = this.handleHit(selected, screen);
      if (handle) {
        this.state = {
          kind: "resize", id: selected.id, handle, orig: { ...selected.box },
        };
        return;
      }
    }
    const p = this.viewport.screenToImage(screen);
    const under = this.store.boxAt(p);
    if (under) {
      this.store.select(under.id);
      this.state = {
        kind: "move",
        id: under.id,
        grab: { x: p.x - under.box.x, y: p.y - under.box.y },
        orig: { ...under.box },
      };
      return;
    }
    this.store.select(null);
    this.state = { kind: "draw", anchor: p, current: p };
  }

  pointerMove(screen: Pt): void {
    const p = this.viewport.screenToImage(screen);
    switch (this.state.kind) {
      case "idle":
        return;
      case "pan":
        this.viewport.panBy(screen.x - this.state.last.x,
          screen.y - this.state.last.y);
        this.state.last = screen;
        return;
      case "draw":
        this.state.current = p;
        return;
      case "move": {
        // keep the full box inside the image so the clamp never shrinks it
        const img = this.store.image;
        let nx = p.x - this.state.grab.x;
        let ny = p.y - this.state.grab.y;
        if (img) {
          nx = Math.min(img.width - 0.5 - this.state.orig.w,
            Math.max(-0.5, nx));
          ny = Math.min(img.height - 0.5 - this.state.orig.h,
            Math.max(-0.5, ny));
        }
        this.store.updateBox(this.state.id,
          { ...this.state.orig, x: nx, y: ny });
        return;
      }
      case "resize":
        this.store.updateBox(this.state.id,
          resized(this.state.orig, this.state.handle, p));
        return;
    }
  }

  /** Finish the gesture; returns the box added by a draw, if any. */
  pointerUp(): CanvasBox | null {
    const state = this.state;
    this.state = { kind: "idle" };
    if (state.kind === "draw") {
      return this.store.add(normalized(state.anchor, state.current),
        this.activeCategory);
    }
    return null;
  }

  /** Abort the gesture (Escape), restoring the box a drag started from. */
  cancel(): void {
    const state = this.state;
    this.state = { kind: "idle" };
    if (state.kind === "move" || state.kind === "resize") {
      this.store.updateBox(state.id, state.orig);
    }
  }
}
