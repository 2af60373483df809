import type { Pt } from "./geometry.js";

/**
 * Affine zoom/pan between image-frame and screen-frame coordinates.
 *
 * Image frame: pixel (0, 0) is the centre of the top-left pixel, so the
 * drawn bitmap spans [-0.5, dim - 0.5]. A bitmap painted at the canvas
 * origin has that pixel's centre at canvas (0.5, 0.5), hence the half-pixel
 * shift inside both mappings. Scale and translation are plain doubles;
 * round trips are exact to far below the 0.01 px contract.
 */
export class Viewport {
  scale = 1;
  tx = 0;
  ty = 0;

  constructor(
    public readonly minScale = 0.05,
    public readonly maxScale = 64,
  ) {}

  imageToScreen(p: Pt): Pt {
    return {
      x: (p.x + 0.5) * this.scale + this.tx,
      y: (p.y + 0.5) * this.scale + this.ty,
    };
  }

  screenToImage(p: Pt): Pt {
    return {
      x: (p.x - this.tx) / this.scale - 0.5,
      y: (p.y - this.ty) / this.scale - 0.5,
    };
  }

  /** Rescale about a screen point, keeping it over the same image point. */
  zoomAt(screen: Pt, factor: number): void {
    const next = Math.min(this.maxScale,
      Math.max(this.minScale, this.scale * factor));
    if (next === this.scale) return;
    const ux = (screen.x - this.tx) / this.scale;
    const uy = (screen.y - this.ty) / this.scale;
    this.scale = next;
    this.tx = screen.x - ux * this.scale;
    this.ty = screen.y - uy * this.scale;
  }

  panBy(dx: number, dy: number): void {
    this.tx += dx;
    this.ty += dy;
  }

  /** Fit an image-frame rectangle into a view rectangle, centred. */
  fitRegion(x0: number, y0: number, x1: number, y1: number,
            viewW: number, viewH: number, margin = 16): void {
    const w = Math.max(x1 - x0, 1e-9);
    const h = Math.max(y1 - y0, 1e-9);
    const availW = Math.max(1, viewW - 2 * margin);
    const availH = Math.max(1, viewH - 2 * margin);
    this.scale = Math.min(this.maxScale,
      Math.max(this.minScale, Math.min(availW / w, availH / h)));
    this.tx = (viewW - w * this.scale) / 2 - (x0 + 0.5) * this.scale;
    this.ty = (viewH - h * this.scale) / 2 - (y0 + 0.5) * this.scale;
  }

  /** Fit a whole image (extent [-0.5, dim - 0.5]) into the view. */
  fit(imgW: number, imgH: number, viewW: number, viewH: number,
      margin = 16): void {
    this.fitRegion(-0.5, -0.5, imgW - 0.5, imgH - 0.5, viewW, viewH, margin);
  }

  /** Canvas transform placing bitmap pixel (c, r) over square [c,c+1]x[r,r+1]. */
  applyTo(ctx: { setTransform(a: number, b: number, c: number, d: number,
                              e: number, f: number): void }): void {
    ctx.setTransform(this.scale, 0, 0, this.scale, this.tx, this.ty);
  }
}
