import type { Api } from "./api.js";
import {
  Box,
  clampToImage,
  containsPoint,
  Pt,
  roundBox,
} from "./geometry.js";
import type { GcpMark, ImageEntry } from "./types.js";

/** A box being edited, identified by a client-side id. */
export interface CanvasBox {
  id: number;
  box: Box;
  category: number;
}

export type SaveOutcome =
  | { kind: "saved"; version: number }
  /**
   * The service is last-write-wins: our write landed, but the version we
   * loaded was no longer current, meaning another session's save was
   * silently overwritten. The caller should offer a reload.
   */
  | { kind: "conflict"; loadedVersion: number; overwroteVersion: number;
      version: number };

const MIN_BOX_PX = 1.0;

/**
 * Editable annotation state for one image: the box list, the selection,
 * the unsaved-changes flag, and the optimistic version token used to
 * detect concurrent sessions at save time.
 */
export class AnnotationStore {
  boxes: CanvasBox[] = [];
  selectedId: number | null = null;
  dirty = false;
  loadedVersion = 0;
  image: ImageEntry | null = null;
  private nextId = 1;

  constructor(
    private readonly api: Api,
    readonly categoryCount: number,
  ) {
    if (categoryCount < 1 || categoryCount > 5) {
      throw new RangeError(`category palette must hold 1..5, got ${categoryCount}`);
    }
  }

  /** Replace all state from the stored document for `image`. */
  async open(image: ImageEntry): Promise<void> {
    const doc = await this.api.annotations(image.id);
    this.image = image;
    this.boxes = doc.annotations.map((a) => ({
      id: this.nextId++,
      box: { x: a.bbox[0], y: a.bbox[1], w: a.bbox[2], h: a.bbox[3] },
      category: a.category_id,
    }));
    this.loadedVersion = doc.version;
    this.selectedId = null;
    this.dirty = false;
  }

  private checkCategory(category: number): void {
    if (!Number.isInteger(category) || category < 1
        || category > this.categoryCount) {
      throw new RangeError(
        `category ${category} outside declared set 1..${this.categoryCount}`);
    }
  }

  private tidy(box: Box): Box {
    if (!this.image) throw new Error("no image open");
    return clampToImage(roundBox(box), this.image.width, this.image.height);
  }

  /**
   * Add a drawn box. Returns null when the box is degenerate after
   * clamping (an accidental click rather than a drag).
   */
  add(box: Box, category: number): CanvasBox | null {
    this.checkCategory(category);
    const tidied = this.tidy(box);
    if (tidied.w < MIN_BOX_PX || tidied.h < MIN_BOX_PX) return null;
    const entry: CanvasBox = { id: this.nextId++, box: tidied, category };
    this.boxes.push(entry);
    this.selectedId = entry.id;
    this.dirty = true;
    return entry;
  }

  get(id: number): CanvasBox | undefined {
    return this.boxes.find((b) => b.id === id);
  }

  get selected(): CanvasBox | null {
    return this.selectedId === null ? null : this.get(this.selectedId) ?? null;
  }

  updateBox(id: number, box: Box): void {
    const entry = this.get(id);
    if (!entry) return;
    entry.box = this.tidy(box);
    this.dirty = true;
  }

  setCategory(id: number, category: number): void {
    this.checkCategory(category);
    const entry = this.get(id);
    if (entry && entry.category !== category) {
      entry.category = category;
      this.dirty = true;
    }
  }

  remove(id: number): void {
    const n = this.boxes.length;
    this.boxes = this.boxes.filter((b) => b.id !== id);
    if (this.boxes.length !== n) this.dirty = true;
    if (this.selectedId === id) this.selectedId = null;
  }

  select(id: number | null): void {
    this.selectedId = id;
  }

  /** Topmost box under an image-frame point (later boxes draw on top). */
  boxAt(p: Pt): CanvasBox | null {
    for (let i = this.boxes.length - 1; i >= 0; i--) {
      const entry = this.boxes[i]!;
      if (containsPoint(entry.box, p)) return entry;
    }
    return null;
  }

  async save(): Promise<SaveOutcome> {
    if (!this.image) throw new Error("no image open");
    const resp = await this.api.saveAnnotations(
      this.image.id,
      this.boxes.map((b) => ({
        bbox: [b.box.x, b.box.y, b.box.w, b.box.h] as
          [number, number, number, number],
        category_id: b.category,
      })),
    );
    const stale = resp.previous_version !== this.loadedVersion;
    const loaded = this.loadedVersion;
    this.loadedVersion = resp.version;
    this.dirty = false;
    return stale
      ? { kind: "conflict", loadedVersion: loaded,
          overwroteVersion: resp.previous_version, version: resp.version }
      : { kind: "saved", version: resp.version };
  }
}

/**
 * GCP pixel marks for the whole project, keyed by (gcp, image). One mark
 * per pair; re-placing moves it and clears its confirmation.
 */
export class GcpStore {
  marks: GcpMark[] = [];
  dirty = false;
  loadedVersion = 0;

  constructor(private readonly api: Api) {}

  async open(): Promise<void> {
    const doc = await this.api.gcps();
    this.marks = doc.marks.map((m) => ({ ...m }));
    this.loadedVersion = doc.version;
    this.dirty = false;
  }

  markFor(gcp: string, image: string): GcpMark | undefined {
    return this.marks.find((m) => m.gcp === gcp && m.image === image);
  }

  /** Place or move the mark for (gcp, image) at a sub-pixel position. */
  place(gcp: string, image: ImageEntry, col: number, row: number): GcpMark {
    const q = (v: number, hi: number) =>
      Math.min(hi - 0.5, Math.max(-0.5, Math.round(v * 100) / 100));
    const existing = this.markFor(gcp, image.file_name);
    const mark: GcpMark = {
      gcp,
      image: image.file_name,
      col: q(col, image.width),
      row: q(row, image.height),
      confirmed: false,
    };
    if (existing) {
      Object.assign(existing, mark);
      this.dirty = true;
      return existing;
    }
    this.marks.push(mark);
    this.dirty = true;
    return mark;
  }

  toggleConfirmed(gcp: string, image: string): void {
    const mark = this.markFor(gcp, image);
    if (mark) {
      mark.confirmed = !mark.confirmed;
      this.dirty = true;
    }
  }

  remove(gcp: string, image: string): void {
    const n = this.marks.length;
    this.marks = this.marks.filter(
      (m) => !(m.gcp === gcp && m.image === image));
    if (this.marks.length !== n) this.dirty = true;
  }

  get confirmedCount(): number {
    return this.marks.filter((m) => m.confirmed).length;
  }

  async save(): Promise<SaveOutcome> {
    const resp = await this.api.saveGcps(this.marks);
    const stale = resp.previous_version !== this.loadedVersion;
    const loaded = this.loadedVersion;
    this.loadedVersion = resp.version;
    this.dirty = false;
    return stale
      ? { kind: "conflict", loadedVersion: loaded,
          overwroteVersion: resp.previous_version, version: resp.version }
      : { kind: "saved", version: resp.version };
  }
}
