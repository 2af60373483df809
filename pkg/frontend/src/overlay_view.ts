import { Api, ApiError } from "./api.js";
import type { ViewChrome } from "./annotate_view.js";
import { CanvasHost } from "./canvas_host.js";
import {
  OverlayLayers,
  OverlayModel,
  overlayModel,
  renderOverlay,
  tooltipAt,
} from "./overlay.js";
import type { ImageEntry } from "./types.js";
import { Viewport } from "./viewport.js";

/**
 * The projection-overlay tab: the stored boxes of an image cast onto the
 * orthomosaic (blue) against the manual ground-truth boxes (red), with a
 * per-pair IoU tooltip under the cursor. Layer toggles only flip
 * visibility — the viewport is never touched by them.
 */
export class OverlayView {
  readonly viewport = new Viewport();
  readonly layers: OverlayLayers = { projected: true, manual: true };
  model: OverlayModel | null = null;

  private readonly host: CanvasHost;
  private images: ImageEntry[] = [];
  private current: ImageEntry | null = null;
  private readonly listEl: HTMLUListElement;
  private readonly failuresEl: HTMLElement;
  private readonly tooltipEl: HTMLElement;
  private panLast: { x: number; y: number } | null = null;

  constructor(
    private readonly api: Api,
    private readonly chrome: ViewChrome,
  ) {
    this.listEl = document.getElementById("overlay-images") as
      HTMLUListElement;
    this.failuresEl = document.getElementById("overlay-failures")!;
    this.tooltipEl = document.getElementById("overlay-tooltip")!;
    this.host = new CanvasHost(
      document.getElementById("overlay-canvas") as HTMLCanvasElement);

    this.host.onDraw = (ctx) => {
      if (this.model) {
        renderOverlay(ctx, this.viewport, this.model, this.layers);
      }
    };
    this.host.onPointerDown = (p) => {
      this.panLast = p;
    };
    this.host.onPointerMove = (p) => {
      const img = this.viewport.screenToImage(p);
      this.chrome.setCursorPos(
        `${img.x.toFixed(2)}, ${img.y.toFixed(2)} px`);
      if (this.panLast) {
        this.viewport.panBy(p.x - this.panLast.x, p.y - this.panLast.y);
        this.panLast = p;
        this.host.invalidate();
        return;
      }
      this.showTooltip(p);
    };
    this.host.onPointerUp = () => {
      this.panLast = null;
    };
    this.host.onWheel = (p, dy) => {
      this.viewport.zoomAt(p, Math.exp(-dy * 0.0015));
      this.host.invalidate();
    };

    for (const id of ["layer-projected", "layer-manual"] as const) {
      const box = document.getElementById(id) as HTMLInputElement;
      box.addEventListener("change", () => {
        this.layers[id === "layer-projected" ? "projected" : "manual"] =
          box.checked;
        this.host.invalidate(); // viewport deliberately untouched
      });
    }
  }

  setImages(images: ImageEntry[]): void {
    this.images = images;
    this.renderList();
  }

  private renderList(): void {
    this.listEl.textContent = "";
    for (const entry of this.images) {
      const li = document.createElement("li");
      li.classList.toggle("active", entry.id === this.current?.id);
      const name = document.createElement("span");
      name.textContent = entry.file_name;
      li.append(name);
      li.addEventListener("click", () => void this.open(entry));
      this.listEl.appendChild(li);
    }
  }

  async open(entry: ImageEntry): Promise<void> {
    try {
      const doc = await this.api.preview(entry.id);
      this.model = overlayModel(doc);
      const refit = this.current?.id !== entry.id;
      this.current = entry;
      if (refit) this.fitToBoxes();
      this.renderList();
      this.renderFailures();
      const pairs = this.model.projected.filter((p) => p.iou !== null);
      this.chrome.setStatus(
        `${entry.file_name}: ${this.model.projected.length} projected, `
        + `${this.model.manual.length} manual, ${pairs.length} paired`);
      this.host.invalidate();
    } catch (err) {
      this.chrome.setStatus(err instanceof ApiError
        ? `preview: ${err.message}` : String(err));
    }
  }

  private fitToBoxes(): void {
    if (!this.model) return;
    const boxes = [
      ...this.model.projected.map((p) => p.box),
      ...this.model.manual,
    ];
    if (boxes.length === 0) return;
    let x0 = Infinity;
    let y0 = Infinity;
    let x1 = -Infinity;
    let y1 = -Infinity;
    for (const b of boxes) {
      x0 = Math.min(x0, b.x);
      y0 = Math.min(y0, b.y);
      x1 = Math.max(x1, b.x + b.w);
      y1 = Math.max(y1, b.y + b.h);
    }
    this.viewport.fitRegion(x0, y0, x1, y1,
      this.host.viewWidth, this.host.viewHeight, 40);
  }

  private renderFailures(): void {
    if (!this.model) return;
    this.failuresEl.textContent = this.model.failures.length
      ? "not projected:\n" + this.model.failures
        .map((f) => `det ${f.detId}: ${f.status}`).join("\n")
      : "";
  }

  private showTooltip(p: { x: number; y: number }): void {
    const text = this.model
      ? tooltipAt(p, this.viewport, this.model, this.layers)
      : null;
    if (text) {
      this.tooltipEl.textContent = text;
      this.tooltipEl.style.left = `${p.x + 14}px`;
      this.tooltipEl.style.top = `${p.y + 14}px`;
      this.tooltipEl.hidden = false;
    } else {
      this.tooltipEl.hidden = true;
    }
  }

  onKey(_ev: KeyboardEvent): boolean {
    return false;
  }

  invalidate(): void {
    this.host.invalidate();
  }
}
