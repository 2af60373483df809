import type { Pt } from "./geometry.js";

/**
 * Owns one canvas element: device-pixel-ratio sizing, a render-on-demand
 * loop, and pointer plumbing that hands views plain CSS-pixel screen
 * coordinates. Views assign the hooks they need and call `invalidate()`
 * whenever state changed.
 */
export class CanvasHost {
  readonly ctx: CanvasRenderingContext2D;
  onDraw: ((ctx: CanvasRenderingContext2D, w: number, h: number) => void)
    | null = null;
  onPointerDown: ((p: Pt, ev: PointerEvent) => void) | null = null;
  onPointerMove: ((p: Pt, ev: PointerEvent) => void) | null = null;
  onPointerUp: ((p: Pt, ev: PointerEvent) => void) | null = null;
  onWheel: ((p: Pt, deltaY: number) => void) | null = null;

  private needsDraw = false;
  private rafPending = false;

  constructor(readonly canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2d canvas context unavailable");
    this.ctx = ctx;

    canvas.addEventListener("pointerdown", (ev) => {
      canvas.setPointerCapture(ev.pointerId);
      this.onPointerDown?.(this.pt(ev), ev);
    });
    canvas.addEventListener("pointermove", (ev) => {
      this.onPointerMove?.(this.pt(ev), ev);
    });
    canvas.addEventListener("pointerup", (ev) => {
      canvas.releasePointerCapture(ev.pointerId);
      this.onPointerUp?.(this.pt(ev), ev);
    });
    canvas.addEventListener("wheel", (ev) => {
      ev.preventDefault();
      this.onWheel?.(this.pt(ev), ev.deltaY);
    }, { passive: false });
    canvas.addEventListener("contextmenu", (ev) => ev.preventDefault());

    new ResizeObserver(() => {
      this.resize();
      this.invalidate();
    }).observe(canvas);
    this.resize();
  }

  private pt(ev: MouseEvent): Pt {
    const r = this.canvas.getBoundingClientRect();
    return { x: ev.clientX - r.left, y: ev.clientY - r.top };
  }

  get viewWidth(): number {
    return this.canvas.clientWidth;
  }

  get viewHeight(): number {
    return this.canvas.clientHeight;
  }

  private resize(): void {
    const dpr = window.devicePixelRatio || 1;
    const w = Math.max(1, Math.floor(this.canvas.clientWidth * dpr));
    const h = Math.max(1, Math.floor(this.canvas.clientHeight * dpr));
    if (this.canvas.width !== w || this.canvas.height !== h) {
      this.canvas.width = w;
      this.canvas.height = h;
    }
  }

  /** Schedule a repaint; multiple calls per frame collapse into one. */
  invalidate(): void {
    this.needsDraw = true;
    if (this.rafPending) return;
    this.rafPending = true;
    requestAnimationFrame(() => {
      this.rafPending = false;
      if (!this.needsDraw) return;
      this.needsDraw = false;
      const dpr = window.devicePixelRatio || 1;
      this.ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
      this.ctx.clearRect(0, 0, this.viewWidth, this.viewHeight);
      this.onDraw?.(this.ctx, this.viewWidth, this.viewHeight);
    });
  }
}
