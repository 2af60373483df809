import { Api, ApiError } from "./api.js";
import { BoxTool } from "./boxtool.js";
import { CanvasHost } from "./canvas_host.js";
import { drawBoxes } from "./render.js";
import { categoryColor } from "./render.js";
import { AnnotationStore } from "./store.js";
import type { ImageEntry, ProjectInfo } from "./types.js";
import { Viewport } from "./viewport.js";

export interface ViewChrome {
  setStatus(msg: string): void;
  setCursorPos(msg: string): void;
  showBanner(text: string, onReload: (() => void) | null): void;
}

/** The bounding-box annotation tab: canvas, palette, image list, save. */
export class AnnotateView {
  readonly store: AnnotationStore;
  readonly viewport = new Viewport();
  readonly tool: BoxTool;
  spaceDown = false;

  private readonly host: CanvasHost;
  private bitmap: HTMLImageElement | null = null;
  private current: ImageEntry | null = null;
  private images: ImageEntry[] = [];
  private readonly listEl: HTMLUListElement;
  private readonly paletteEl: HTMLElement;
  private readonly saveBtn: HTMLButtonElement;

  constructor(
    private readonly api: Api,
    private readonly info: ProjectInfo,
    private readonly chrome: ViewChrome,
  ) {
    this.store = new AnnotationStore(api, info.categories.length);
    this.tool = new BoxTool(this.store, this.viewport);
    this.listEl = document.getElementById("annotate-images") as
      HTMLUListElement;
    this.paletteEl = document.getElementById("palette")!;
    this.saveBtn = document.getElementById("annotate-save") as
      HTMLButtonElement;
    this.host = new CanvasHost(
      document.getElementById("annotate-canvas") as HTMLCanvasElement);

    this.host.onDraw = (ctx, w, h) => this.draw(ctx, w, h);
    this.host.onPointerDown = (p, ev) => {
      if (ev.button === 1 || this.spaceDown || ev.altKey) {
        this.tool.pointerDown(p, { pan: true });
      } else if (ev.button === 0) {
        this.tool.pointerDown(p);
      }
      this.host.invalidate();
    };
    this.host.onPointerMove = (p) => {
      const img = this.viewport.screenToImage(p);
      this.chrome.setCursorPos(
        `${img.x.toFixed(2)}, ${img.y.toFixed(2)} px`);
      if (this.tool.dragging) {
        this.tool.pointerMove(p);
        this.host.invalidate();
      } else {
        this.updateCursor(p);
      }
    };
    this.host.onPointerUp = () => {
      this.tool.pointerUp();
      this.refreshChrome();
      this.host.invalidate();
    };
    this.host.onWheel = (p, dy) => {
      this.viewport.zoomAt(p, Math.exp(-dy * 0.0015));
      this.chrome.setStatus(`zoom ${this.viewport.scale.toFixed(2)}×`);
      this.host.invalidate();
    };

    this.buildPalette();
    this.saveBtn.addEventListener("click", () => void this.save());
  }

  private buildPalette(): void {
    this.info.categories.forEach((name, i) => {
      const btn = document.createElement("button");
      btn.textContent = `${i + 1} ${name}`;
      btn.style.color = categoryColor(i + 1);
      if (i === 0) btn.classList.add("active");
      btn.addEventListener("click", () => this.setCategory(i + 1));
      this.paletteEl.appendChild(btn);
    });
  }

  private setCategory(category: number): void {
    if (category < 1 || category > this.info.categories.length) return;
    this.tool.activeCategory = category;
    if (this.store.selectedId !== null) {
      this.store.setCategory(this.store.selectedId, category);
    }
    this.paletteEl.querySelectorAll("button").forEach((b, i) =>
      b.classList.toggle("active", i + 1 === category));
    this.refreshChrome();
    this.host.invalidate();
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
      const meta = document.createElement("span");
      meta.className = "meta";
      meta.textContent = `v${entry.annotations_version}`;
      li.append(name, meta);
      li.addEventListener("click", () => void this.open(entry));
      this.listEl.appendChild(li);
    }
  }

  /** Switch images, prompting when unsaved edits would be dropped. */
  async open(entry: ImageEntry): Promise<void> {
    if (this.store.dirty
        && !window.confirm("Discard unsaved annotation changes?")) {
      return;
    }
    await this.store.open(entry);
    this.current = entry;
    entry.annotations_version = this.store.loadedVersion;
    this.bitmap = await this.loadBitmap(entry.id);
    this.viewport.fit(entry.width, entry.height,
      this.host.viewWidth, this.host.viewHeight);
    this.renderList();
    this.refreshChrome();
    this.chrome.setStatus(
      `${entry.file_name} — ${this.store.boxes.length} boxes,`
      + ` v${this.store.loadedVersion}`);
    this.host.invalidate();
  }

  private loadBitmap(imageId: number): Promise<HTMLImageElement> {
    return new Promise((resolve, reject) => {
      const img = new Image();
      img.onload = () => resolve(img);
      img.onerror = () => reject(new Error(`image ${imageId} failed to load`));
      img.src = this.api.imageFileUrl(imageId);
    });
  }

  /** Keyboard entry point; returns true when the key was consumed. */
  onKey(ev: KeyboardEvent): boolean {
    if ((ev.ctrlKey || ev.metaKey) && ev.key.toLowerCase() === "s") {
      void this.save();
      return true;
    }
    if (ev.key >= "1" && ev.key <= "5") {
      const n = Number(ev.key);
      if (n <= this.info.categories.length) this.setCategory(n);
      return true; // a sixth category has no palette slot: swallowed here
    }
    if (ev.key === "Delete" || ev.key === "Backspace") {
      if (this.store.selectedId !== null) {
        this.store.remove(this.store.selectedId);
        this.refreshChrome();
        this.host.invalidate();
      }
      return true;
    }
    if (ev.key === "Escape") {
      if (this.tool.dragging) this.tool.cancel();
      else this.store.select(null);
      this.host.invalidate();
      return true;
    }
    return false;
  }

  async save(): Promise<void> {
    if (!this.current) return;
    try {
      const out = await this.store.save();
      this.current.annotations_version = this.store.loadedVersion;
      this.renderList();
      this.refreshChrome();
      if (out.kind === "conflict") {
        this.chrome.showBanner(
          `Save landed as v${out.version}, but another session had already `
          + `written v${out.overwroteVersion} (you loaded `
          + `v${out.loadedVersion}) — its boxes were overwritten. `
          + `Reload to resync.`,
          () => void this.open(this.current!));
      } else {
        this.chrome.setStatus(`saved v${out.version}`);
      }
    } catch (err) {
      this.chrome.setStatus(err instanceof ApiError
        ? `save failed: ${err.message}`
        : `save failed: ${String(err)}`);
    }
  }

  private refreshChrome(): void {
    this.saveBtn.disabled = !this.store.dirty;
    this.saveBtn.textContent = this.store.dirty ? "Save •" : "Save";
  }

  private updateCursor(p: { x: number; y: number }): void {
    const hover = this.tool.hover(p);
    const cursors: Record<string, string> = {
      nw: "nwse-resize", se: "nwse-resize",
      ne: "nesw-resize", sw: "nesw-resize",
      n: "ns-resize", s: "ns-resize",
      e: "ew-resize", w: "ew-resize",
    };
    this.host.canvas.style.cursor =
      hover.kind === "handle" ? cursors[hover.id]!
        : hover.kind === "box" ? "move"
          : "crosshair";
  }

  private draw(ctx: CanvasRenderingContext2D, _w: number, _h: number): void {
    if (this.bitmap) {
      ctx.save();
      ctx.transform(this.viewport.scale, 0, 0, this.viewport.scale,
        this.viewport.tx, this.viewport.ty);
      ctx.imageSmoothingEnabled = this.viewport.scale < 1;
      ctx.drawImage(this.bitmap, 0, 0);
      ctx.restore();
    }
    drawBoxes(ctx, this.viewport, this.store.boxes, this.store.selectedId,
      this.tool.draft);
  }

  invalidate(): void {
    this.host.invalidate();
  }
}
