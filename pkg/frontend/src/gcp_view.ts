import { Api, ApiError } from "./api.js";
import type { ViewChrome } from "./annotate_view.js";
import { CanvasHost } from "./canvas_host.js";
import type { Pt } from "./geometry.js";
import { drawCrosshair } from "./render.js";
import { GcpStore } from "./store.js";
import type { CandidateEntry, ImageEntry } from "./types.js";
import { Viewport } from "./viewport.js";

const MARK_COLOR = "#fbbf24";
const CONFIRMED_COLOR = "#4ade80";
const CLICK_SLOP_PX = 3;

/**
 * The GCP tab: type a marker name, fetch the candidate images ranked by
 * camera distance, click to place a sub-pixel mark, confirm, export.
 * A drag pans; only a still click places a mark.
 */
export class GcpView {
  readonly store: GcpStore;
  readonly viewport = new Viewport();
  spaceDown = false;

  private readonly host: CanvasHost;
  private images: ImageEntry[] = [];
  private bitmap: HTMLImageElement | null = null;
  private currentGcp: string | null = null;
  private currentImage: ImageEntry | null = null;
  private candidates: CandidateEntry[] = [];
  private drag: { start: Pt; panned: boolean } | null = null;

  private readonly candidatesEl: HTMLUListElement;
  private readonly marksEl: HTMLElement;
  private readonly saveBtn: HTMLButtonElement;

  constructor(
    private readonly api: Api,
    private readonly chrome: ViewChrome,
  ) {
    this.store = new GcpStore(api);
    this.candidatesEl = document.getElementById("gcp-candidates") as
      HTMLUListElement;
    this.marksEl = document.getElementById("gcp-marks")!;
    this.saveBtn = document.getElementById("gcp-save") as HTMLButtonElement;
    this.host = new CanvasHost(
      document.getElementById("gcp-canvas") as HTMLCanvasElement);

    this.host.onDraw = (ctx, w, h) => this.draw(ctx, w, h);
    this.host.onPointerDown = (p) => {
      this.drag = { start: p, panned: false };
    };
    this.host.onPointerMove = (p) => {
      const img = this.viewport.screenToImage(p);
      this.chrome.setCursorPos(
        `${img.x.toFixed(2)}, ${img.y.toFixed(2)} px`);
      if (!this.drag) return;
      const moved = Math.hypot(p.x - this.drag.start.x,
        p.y - this.drag.start.y);
      if (moved > CLICK_SLOP_PX || this.drag.panned) {
        this.viewport.panBy(p.x - this.drag.start.x,
          p.y - this.drag.start.y);
        this.drag = { start: p, panned: true };
        this.host.invalidate();
      }
    };
    this.host.onPointerUp = (p) => {
      const wasClick = this.drag !== null && !this.drag.panned;
      this.drag = null;
      if (wasClick && this.currentGcp && this.currentImage) {
        const img = this.viewport.screenToImage(p);
        this.store.place(this.currentGcp, this.currentImage, img.x, img.y);
        this.refreshChrome();
        this.host.invalidate();
      }
    };
    this.host.onWheel = (p, dy) => {
      this.viewport.zoomAt(p, Math.exp(-dy * 0.0015));
      this.host.invalidate();
    };

    const form = document.getElementById("gcp-form") as HTMLFormElement;
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      const name = (document.getElementById("gcp-name") as HTMLInputElement)
        .value.trim();
      if (name) void this.find(name);
    });
    this.saveBtn.addEventListener("click", () => void this.save());
    document.getElementById("gcp-export")!
      .addEventListener("click", () => void this.export());
  }

  setImages(images: ImageEntry[]): void {
    this.images = images;
  }

  async load(): Promise<void> {
    await this.store.open();
    this.refreshChrome();
  }

  async find(gcpName: string): Promise<void> {
    try {
      const doc = await this.api.candidates(gcpName);
      this.currentGcp = doc.gcp;
      this.candidates = doc.candidates;
      this.renderCandidates();
      this.chrome.setStatus(`${doc.candidates.length} candidate(s) within `
        + `${doc.radius_m} m of ${doc.gcp}`);
      const first = doc.candidates.find((c) => c.image_id !== null);
      if (first) await this.openCandidate(first);
    } catch (err) {
      this.chrome.setStatus(err instanceof ApiError
        ? `candidates: ${err.message}` : String(err));
    }
  }

  private renderCandidates(): void {
    this.candidatesEl.textContent = "";
    for (const cand of this.candidates) {
      const li = document.createElement("li");
      li.classList.toggle("active",
        cand.image === this.currentImage?.file_name);
      const name = document.createElement("span");
      name.textContent = cand.image;
      const meta = document.createElement("span");
      meta.className = "meta";
      const mark = this.currentGcp
        ? this.store.markFor(this.currentGcp, cand.image) : undefined;
      const badge = mark ? (mark.confirmed ? " ✓" : " ●") : "";
      meta.textContent = `${cand.distance_m.toFixed(1)} m${badge}`;
      li.append(name, meta);
      if (cand.image_id === null) {
        li.style.opacity = "0.4";
        li.title = "not served by this project";
      } else {
        li.addEventListener("click", () => void this.openCandidate(cand));
      }
      this.candidatesEl.appendChild(li);
    }
  }

  private async openCandidate(cand: CandidateEntry): Promise<void> {
    const entry = this.images.find((im) => im.id === cand.image_id);
    if (!entry) return;
    this.currentImage = entry;
    this.bitmap = await new Promise((resolve, reject) => {
      const img = new Image();
      img.onload = () => resolve(img);
      img.onerror = () => reject(new Error("image failed to load"));
      img.src = this.api.imageFileUrl(entry.id);
    });
    this.viewport.fit(entry.width, entry.height,
      this.host.viewWidth, this.host.viewHeight);
    this.renderCandidates();
    this.refreshChrome();
    this.host.invalidate();
  }

  onKey(ev: KeyboardEvent): boolean {
    if (ev.key.toLowerCase() === "c" && this.currentGcp
        && this.currentImage) {
      this.store.toggleConfirmed(this.currentGcp,
        this.currentImage.file_name);
      this.refreshChrome();
      this.renderCandidates();
      this.host.invalidate();
      return true;
    }
    if ((ev.key === "Delete" || ev.key === "Backspace") && this.currentGcp
        && this.currentImage) {
      this.store.remove(this.currentGcp, this.currentImage.file_name);
      this.refreshChrome();
      this.renderCandidates();
      this.host.invalidate();
      return true;
    }
    return false;
  }

  async save(): Promise<void> {
    try {
      const out = await this.store.save();
      this.refreshChrome();
      if (out.kind === "conflict") {
        this.chrome.showBanner(
          `Mark save landed as v${out.version} over another session's `
          + `v${out.overwroteVersion}. Reload to resync.`,
          () => void this.load().then(() => this.host.invalidate()));
      } else {
        this.chrome.setStatus(`marks saved, v${out.version}`);
      }
    } catch (err) {
      this.chrome.setStatus(err instanceof ApiError
        ? `save failed: ${err.message}` : String(err));
    }
  }

  async export(): Promise<void> {
    try {
      if (this.store.dirty) await this.save();
      const resp = await this.api.export("gcp_list");
      this.chrome.setStatus(
        `wrote ${resp.lines} line(s) to ${resp.written[0]}`);
    } catch (err) {
      this.chrome.setStatus(err instanceof ApiError
        ? `export: ${err.message}` : String(err));
    }
  }

  private refreshChrome(): void {
    this.saveBtn.disabled = !this.store.dirty;
    this.saveBtn.textContent = this.store.dirty
      ? "Save marks •" : "Save marks";
    const lines = this.store.marks.map((m) =>
      `${m.gcp} @ ${m.image}: ${m.col.toFixed(2)}, ${m.row.toFixed(2)}`
      + `${m.confirmed ? " ✓" : ""}`);
    this.marksEl.textContent = lines.length
      ? `${this.store.confirmedCount}/${lines.length} confirmed\n`
        + lines.join("\n")
      : "no marks yet — c confirms, Del removes";
  }

  private draw(ctx: CanvasRenderingContext2D, w: number, h: number): void {
    if (this.bitmap) {
      ctx.save();
      ctx.transform(this.viewport.scale, 0, 0, this.viewport.scale,
        this.viewport.tx, this.viewport.ty);
      ctx.imageSmoothingEnabled = this.viewport.scale < 1;
      ctx.drawImage(this.bitmap, 0, 0);
      ctx.restore();
    }
    if (this.currentGcp && this.currentImage) {
      const mark = this.store.markFor(this.currentGcp,
        this.currentImage.file_name);
      if (mark) {
        drawCrosshair(ctx, this.viewport, { x: mark.col, y: mark.row },
          w, h, mark.confirmed ? CONFIRMED_COLOR : MARK_COLOR,
          mark.confirmed);
      }
    }
  }

  invalidate(): void {
    this.host.invalidate();
  }
}
