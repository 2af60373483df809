"""Split annotated frames into fixed-size overlapping tiles, recompute the
boxes, partition tiles into train/val/test, and merge per-tile detections
back into source-image coordinates.

Boundary policy for clipped boxes: a box is kept on a tile iff
area(clipped)/area(original) >= min_retention AND min(clipped w, h) >=
min_box_px. Because a clipped box is a subset of its original, that area
ratio IS the IoU between the two, so the retention knob is the familiar
IoU-style threshold.

Edge tiles are shifted inward instead of padded, so every tile has identical
dimensions — detectors dislike ragged inputs — at the cost of extra overlap
near the right/bottom edges.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .formats.coco import (Annotation, AnnotationSet, BBox, Detection,
                           DetectionSet, ImageInfo, iou)


class TilerError(ValueError):
    """Unusable tiling parameters or inputs."""


@dataclass(frozen=True)
class TileSpec:
    tile_w: int = 1024
    tile_h: int = 1024
    overlap: int = 100
    min_retention: float = 0.3
    min_box_px: float = 4.0

    def __post_init__(self):
        if self.overlap < 0 or self.overlap >= min(self.tile_w, self.tile_h):
            raise TilerError(f"overlap {self.overlap} must be in "
                             f"[0, min(tile_w, tile_h))")
        if not 0.0 < self.min_retention <= 1.0:
            raise TilerError(f"min_retention {self.min_retention} outside (0, 1]")
        if self.tile_w <= 0 or self.tile_h <= 0:
            raise TilerError("tile dimensions must be positive")


@dataclass(frozen=True)
class TileRect:
    x: int
    y: int
    w: int
    h: int


@dataclass
class TileRecord:
    """One tile of one source image, with recomputed annotations.

    ``provenance`` maps each regenerated annotation id back to the source
    annotation id; the tile's own origin is in ``rect``.
    """

    source: ImageInfo
    rect: TileRect
    name: str
    annotations: list[Annotation] = field(default_factory=list)
    provenance: dict[int, int] = field(default_factory=dict)


def _axis_starts(img: int, tile: int, stride: int) -> list[int]:
    if img <= tile:
        return [0]
    starts = [0]
    while starts[-1] + tile < img:
        nxt = starts[-1] + stride
        if nxt + tile >= img:
            starts.append(img - tile)
            break
        starts.append(nxt)
    return starts


def tile_grid(img_w: int, img_h: int, spec: TileSpec) -> list[TileRect]:
    """Tile rectangles covering the image completely, row-major order."""
    if img_w <= spec.overlap or img_h <= spec.overlap:
        raise TilerError(f"image {img_w}x{img_h} not larger than the overlap "
                         f"({spec.overlap} px)")
    stride_x = spec.tile_w - spec.overlap
    stride_y = spec.tile_h - spec.overlap
    xs = _axis_starts(img_w, spec.tile_w, stride_x)
    ys = _axis_starts(img_h, spec.tile_h, stride_y)
    w = min(spec.tile_w, img_w)
    h = min(spec.tile_h, img_h)
    return [TileRect(x, y, w, h) for y in ys for x in xs]


def clip_annotations(annotations: list[Annotation], rect: TileRect,
                     spec: TileSpec, next_id: int = 1) \
        -> tuple[list[Annotation], dict[int, int]]:
    """Boxes intersected with the tile, translated to tile-local coordinates.

    Returns (clipped annotations with ids next_id, next_id+1, ...,
    {new id -> source annotation id}).
    """
    out = []
    provenance = {}
    for a in annotations:
        b = a.bbox
        x0 = max(b.x, rect.x)
        y0 = max(b.y, rect.y)
        x1 = min(b.x2, rect.x + rect.w)
        y1 = min(b.y2, rect.y + rect.h)
        w = x1 - x0
        h = y1 - y0
        if w <= 0 or h <= 0:
            continue
        if (w * h) / b.area < spec.min_retention:
            continue
        if min(w, h) < spec.min_box_px:
            continue
        out.append(Annotation(next_id, a.image_id, a.category_id,
                              BBox(x0 - rect.x, y0 - rect.y, w, h)))
        provenance[next_id] = a.id
        next_id += 1
    return out, provenance


def tile_image(aset: AnnotationSet, image: ImageInfo,
               spec: TileSpec) -> list[TileRecord]:
    """All tiles of one image with their recomputed annotations. Tile names
    encode the origin (``stem_x<left>_y<top>``) so provenance survives in any
    downstream file layout."""
    anns = aset.annotations_for(image.id)
    records = []
    stem = image.file_name.rsplit(".", 1)[0]
    for rect in tile_grid(image.width, image.height, spec):
        clipped, prov = clip_annotations(anns, rect, spec)
        records.append(TileRecord(source=image, rect=rect,
                                  name=f"{stem}_x{rect.x}_y{rect.y}",
                                  annotations=clipped, provenance=prov))
    return records


def _round_half_up(x: float) -> int:
    return int(x + 0.5)


def split_counts(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    """Cumulative round-half-up split boundaries; reproduces 100 -> 70/15/15
    and 10 -> 7/2/1 for the default 0.70/0.15/0.15."""
    b1 = _round_half_up(n * ratios[0])
    b2 = _round_half_up(n * (ratios[0] + ratios[1]))
    b1 = min(b1, n)
    b2 = min(max(b2, b1), n)
    return b1, b2 - b1, n - b2


def split_dataset(tiles: list[TileRecord],
                  ratios: tuple[float, float, float] = (0.70, 0.15, 0.15),
                  seed: int = 0, group_by_source: bool = False) \
        -> tuple[list[TileRecord], list[TileRecord], list[TileRecord]]:
    """Deterministic seeded partition into (train, val, test).

    With ``group_by_source`` every tile of a source image lands in one split,
    preventing near-duplicate leakage across overlapping tiles of the same
    frame; the count rule then applies to source images instead of tiles.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise TilerError(f"ratios {ratios} do not sum to 1")
    if any(r < 0 for r in ratios):
        raise TilerError(f"negative ratio in {ratios}")
    rng = random.Random(seed)
    if group_by_source:
        sources = sorted({t.source.file_name for t in tiles})
        if len(sources) < 3:
            raise TilerError(f"cannot split {len(sources)} source images three ways")
        rng.shuffle(sources)
        n_train, n_val, _ = split_counts(len(sources), ratios)
        split_of = {}
        for i, s in enumerate(sources):
            split_of[s] = 0 if i < n_train else (1 if i < n_train + n_val else 2)
        out = ([], [], [])
        for t in tiles:
            out[split_of[t.source.file_name]].append(t)
        return out
    if len(tiles) < 3:
        raise TilerError(f"cannot split {len(tiles)} tiles three ways")
    order = sorted(tiles, key=lambda t: t.name)
    rng.shuffle(order)
    n_train, n_val, _ = split_counts(len(order), ratios)
    return (order[:n_train], order[n_train:n_train + n_val],
            order[n_train + n_val:])


def records_to_annotation_set(records: list[TileRecord], spec: TileSpec,
                              categories) -> AnnotationSet:
    """COCO view of a list of tiles: each tile becomes an image entry, and
    annotation ids are renumbered globally."""
    out = AnnotationSet(categories=list(categories))
    ann_id = 1
    for i, rec in enumerate(sorted(records, key=lambda r: r.name), start=1):
        out.images.append(ImageInfo(i, rec.name + ".jpg", rec.rect.w, rec.rect.h))
        for a in rec.annotations:
            out.annotations.append(Annotation(ann_id, i, a.category_id, a.bbox))
            ann_id += 1
    return out.validate()


def merge_tile_detections(per_tile: list[DetectionSet],
                          tile_origins: list[tuple[float, float]],
                          nms_iou: float = 0.5) -> DetectionSet:
    """Translate per-tile detections back to source-image coordinates and
    suppress duplicates from tile overlaps: greedy score-ordered NMS, where a
    box is dropped if it overlaps an already-kept box of the same category
    with IoU >= nms_iou. Score ties go to the larger box, so a complete
    detection beats its own edge-clipped copy from a neighbouring tile."""
    if len(per_tile) != len(tile_origins):
        raise TilerError(f"{len(per_tile)} detection sets but "
                         f"{len(tile_origins)} origins")
    pooled: list[Detection] = []
    for dset, (ox, oy) in zip(per_tile, tile_origins):
        for d in dset.detections:
            b = d.bbox
            pooled.append(Detection(d.image_id, d.category_id,
                                    BBox(b.x + ox, b.y + oy, b.w, b.h), d.score))
    pooled.sort(key=lambda d: (-d.score, d.bbox.x, d.bbox.y,
                               -d.bbox.w, -d.bbox.h))
    kept: list[Detection] = []
    for d in pooled:
        if any(k.category_id == d.category_id and iou(k.bbox, d.bbox) >= nms_iou
               for k in kept):
            continue
        kept.append(d)
    return DetectionSet(kept)
