"""COCO JSON annotation/detection containers and the YOLO text conversion."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

MAX_CATEGORIES = 5


class CocoError(ValueError):
    """Structurally invalid annotation data."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned pixel rectangle, (x, y) = top-left corner."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.w, self.h)):
            raise CocoError("bbox fields must be finite")
        if self.w <= 0 or self.h <= 0:
            raise CocoError(f"bbox must have positive size, got w={self.w} h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]


@dataclass(frozen=True)
class ImageInfo:
    id: int
    file_name: str
    width: int
    height: int


@dataclass(frozen=True)
class Category:
    id: int
    name: str


@dataclass(frozen=True)
class Annotation:
    id: int
    image_id: int
    category_id: int
    bbox: BBox

    @property
    def area(self) -> float:
        return self.bbox.area


@dataclass(frozen=True)
class Detection:
    image_id: int
    category_id: int
    bbox: BBox
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise CocoError(f"detection score {self.score} outside [0, 1]")


@dataclass
class AnnotationSet:
    images: list[ImageInfo] = field(default_factory=list)
    annotations: list[Annotation] = field(default_factory=list)
    categories: list[Category] = field(default_factory=list)
    extra: dict = field(default_factory=dict)     # unknown top-level keys, kept on read

    def validate(self) -> "AnnotationSet":
        image_ids = {im.id for im in self.images}
        if len(image_ids) != len(self.images):
            raise CocoError("duplicate image ids")
        cat_ids = {c.id for c in self.categories}
        if len(cat_ids) != len(self.categories):
            raise CocoError("duplicate category ids")
        if len(self.categories) > MAX_CATEGORIES:
            raise CocoError(f"at most {MAX_CATEGORIES} categories supported, "
                            f"got {len(self.categories)}")
        ann_ids = set()
        for a in self.annotations:
            if a.id in ann_ids:
                raise CocoError(f"duplicate annotation id {a.id}")
            ann_ids.add(a.id)
            if a.image_id not in image_ids:
                raise CocoError(f"annotation {a.id} references missing image {a.image_id}")
            if a.category_id not in cat_ids:
                raise CocoError(f"annotation {a.id} references missing category "
                                f"{a.category_id}")
        return self

    def image_by_id(self, image_id: int) -> ImageInfo:
        for im in self.images:
            if im.id == image_id:
                return im
        raise CocoError(f"no image with id {image_id}")

    def annotations_for(self, image_id: int) -> list[Annotation]:
        return [a for a in self.annotations if a.image_id == image_id]


@dataclass
class DetectionSet:
    detections: list[Detection] = field(default_factory=list)

    def for_image(self, image_id: int) -> list[Detection]:
        return [d for d in self.detections if d.image_id == image_id]


_KNOWN_IMAGE_KEYS = {"id", "file_name", "width", "height"}


def read_coco(path: str | Path) -> AnnotationSet | DetectionSet:
    """Load a COCO file; a top-level object is an annotation set, a top-level
    array is a detection/result set."""
    with open(path) as f:
        data = json.load(f)
    if isinstance(data, list):
        return _detections_from_list(data)
    if not isinstance(data, dict):
        raise CocoError("COCO file must be a JSON object or array")
    aset = AnnotationSet()
    for im in data.get("images", []):
        try:
            aset.images.append(ImageInfo(int(im["id"]), str(im["file_name"]),
                                         int(im["width"]), int(im["height"])))
        except KeyError as exc:
            raise CocoError(f"image entry missing key {exc}") from None
    for c in data.get("categories", []):
        aset.categories.append(Category(int(c["id"]), str(c.get("name", str(c["id"])))))
    for a in data.get("annotations", []):
        try:
            box = BBox(*[float(v) for v in a["bbox"]])
            aset.annotations.append(Annotation(int(a["id"]), int(a["image_id"]),
                                               int(a["category_id"]), box))
        except KeyError as exc:
            raise CocoError(f"annotation entry missing key {exc}") from None
    aset.extra = {k: v for k, v in data.items()
                  if k not in ("images", "annotations", "categories")}
    return aset.validate()


def _detections_from_list(data: list) -> DetectionSet:
    dets = DetectionSet()
    for d in data:
        box = BBox(*[float(v) for v in d["bbox"]])
        dets.detections.append(Detection(int(d["image_id"]),
                                         int(d.get("category_id", 1)),
                                         box, float(d["score"])))
    return dets


def write_coco(obj: AnnotationSet | DetectionSet, path: str | Path) -> None:
    """Serialize back to COCO JSON. Field order and separators are fixed so
    identical inputs produce identical bytes."""
    if isinstance(obj, AnnotationSet):
        obj.validate()
        payload = {
            "images": [{"id": im.id, "file_name": im.file_name,
                        "width": im.width, "height": im.height}
                       for im in obj.images],
            "annotations": [{"id": a.id, "image_id": a.image_id,
                             "category_id": a.category_id,
                             "bbox": a.bbox.as_list(), "area": a.area}
                            for a in obj.annotations],
            "categories": [{"id": c.id, "name": c.name} for c in obj.categories],
        }
    else:
        payload = [{"image_id": d.image_id, "category_id": d.category_id,
                    "bbox": d.bbox.as_list(), "score": d.score}
                   for d in obj.detections]
    with open(path, "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two axis-aligned boxes."""
    ix = min(a.x2, b.x2) - max(a.x, b.x)
    iy = min(a.y2, b.y2) - max(a.y, b.y)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


# ---------------------------------------------------------------------------
# YOLO text format: one line per box, `class cx cy w h`, all normalized to
# [0, 1] by the image dimensions, center-point convention.


def _fmt_norm(v: float) -> str:
    s = f"{v:.6f}".rstrip("0")
    return s + "0" if s.endswith(".") else s


def coco_to_yolo(aset: AnnotationSet, image: ImageInfo) -> list[str]:
    """YOLO lines for one image. Class index is the position of the
    annotation's category in the set's id-sorted category list."""
    class_of = {c.id: k for k, c in enumerate(sorted(aset.categories, key=lambda c: c.id))}
    lines = []
    for a in aset.annotations_for(image.id):
        b = a.bbox
        cx = (b.x + b.w / 2.0) / image.width
        cy = (b.y + b.h / 2.0) / image.height
        lines.append(" ".join([str(class_of[a.category_id]),
                               _fmt_norm(cx), _fmt_norm(cy),
                               _fmt_norm(b.w / image.width),
                               _fmt_norm(b.h / image.height)]))
    return lines


def yolo_to_coco(lines: list[str], image: ImageInfo,
                 categories: list[Category] | None = None) -> AnnotationSet:
    """Inverse of :func:`coco_to_yolo`; recovers pixel boxes within 0.5 px."""
    if categories is None:
        classes = sorted({int(ln.split()[0]) for ln in lines if ln.strip()})
        categories = [Category(k + 1, f"class{k}") for k in classes] \
            or [Category(1, "class0")]
    cat_ids = [c.id for c in sorted(categories, key=lambda c: c.id)]
    aset = AnnotationSet(images=[image], categories=list(categories))
    for i, ln in enumerate(lines):
        parts = ln.split()
        if not parts:
            continue
        if len(parts) != 5:
            raise CocoError(f"YOLO line {i + 1}: expected 5 fields, got {len(parts)}")
        cls = int(parts[0])
        cx, cy, w, h = (float(p) for p in parts[1:])
        if cls >= len(cat_ids):
            raise CocoError(f"YOLO line {i + 1}: class {cls} has no category")
        box = BBox((cx - w / 2.0) * image.width, (cy - h / 2.0) * image.height,
                   w * image.width, h * image.height)
        aset.annotations.append(Annotation(i + 1, image.id, cat_ids[cls], box))
    return aset.validate()
