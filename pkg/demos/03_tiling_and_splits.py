"""Dataset preparation walkthrough: cut a large annotated frame into
overlapping training tiles, watch the boundary-retention rule work, split
the tiles into train/val/test, and merge per-tile detections back into
frame coordinates.

    python3 demos/03_tiling_and_splits.py
"""

from orthotrace.formats.coco import (Annotation, AnnotationSet, BBox,
                                     Category, Detection, DetectionSet,
                                     ImageInfo)
from orthotrace.tiler import (TileSpec, merge_tile_detections,
                              records_to_annotation_set, split_counts,
                              split_dataset, tile_grid, tile_image)

# ---------------------------------------------------------------------------
# The grid. A 5472 x 3648 aerial frame under 1024 px tiles with 100 px of
# overlap needs a 6 x 4 grid; the trailing tiles are pulled back so no
# pixel is left out and every tile is full size.
# ---------------------------------------------------------------------------

spec = TileSpec(1024, 1024, 100)
grid = tile_grid(5472, 3648, spec)
xs = sorted({r.x for r in grid})
ys = sorted({r.y for r in grid})
print(f"{len(grid)} tiles: column starts {xs}, row starts {ys}\n")

# ---------------------------------------------------------------------------
# Boundary retention. A box sliced by a tile edge survives in that tile
# only when at least min_retention of its area remains (default 30%), and
# only when the clipped remnant is still at least min_box_px on a side.
# The same plant keeps its full box in the neighbouring tile that shows
# it whole - nothing is lost, the fragment rule just keeps the labels
# honest.
# ---------------------------------------------------------------------------

frame = ImageInfo(1, "frame.jpg", 5472, 3648)
truth = AnnotationSet(
    [frame],
    [Annotation(1, 1, 1, BBox(994.0, 100.0, 100.0, 10.0)),    # 30.0% in tile0
     Annotation(2, 1, 1, BBox(725.0, 200.0, 1000.0, 10.0)),   # 29.9% in tile0
     Annotation(3, 1, 1, BBox(400.0, 400.0, 60.0, 60.0))],    # fully inside
    [Category(1, "plant")])
records = tile_image(truth, frame, spec)
tile0 = next(r for r in records if r.rect.x == 0 and r.rect.y == 0)
print(f"tile {tile0.name} keeps {len(tile0.annotations)} of 3 boxes:")
for a in tile0.annotations:
    src = tile0.provenance[a.id]
    b = a.bbox
    print(f"  source box {src} -> ({b.x:.0f}, {b.y:.0f}, {b.w:.0f}, {b.h:.0f})")
print("  (the 29.9% sliver was dropped; its full box lives in tile x=924)\n")

# ---------------------------------------------------------------------------
# Splits. Counts follow the ratios with cumulative rounding - 100 tiles
# make the classic 70/15/15, 10 tiles make 7/2/1 - and the shuffle is
# seeded, so a dataset build is reproducible bit for bit. group_by_source
# keeps all tiles of one frame in one split so overlapping tiles can never
# leak between train and test.
# ---------------------------------------------------------------------------

print(f"split_counts(100) = {split_counts(100, (0.70, 0.15, 0.15))}")
print(f"split_counts(10)  = {split_counts(10, (0.70, 0.15, 0.15))}")
train, val, test = split_dataset(records, seed=42)
print(f"this frame's {len(records)} tiles -> "
      f"{len(train)}/{len(val)}/{len(test)} (seed 42)")
again, _, _ = split_dataset(records, seed=42)
print(f"same seed, same train set: "
      f"{[t.name for t in train] == [t.name for t in again]}")
for label, split in (("train", train), ("val", val), ("test", test)):
    view = records_to_annotation_set(split, spec, truth.categories)
    print(f"  {label}: {len(view.images)} tile images, "
          f"{len(view.annotations)} annotations")
print()

# ---------------------------------------------------------------------------
# Merging detector output. At inference time each tile is scored alone;
# translating the boxes back and de-duplicating the overlap zone
# reconstitutes frame-level detections. Score ties go to the larger box,
# so a complete detection beats its own edge-clipped copy.
# ---------------------------------------------------------------------------

per_tile = [
    DetectionSet([Detection(1, 1, BBox(940.0, 380.0, 60.0, 50.0), 0.91),
                  Detection(1, 1, BBox(100.0, 700.0, 40.0, 40.0), 0.83)]),
    DetectionSet([Detection(1, 1, BBox(16.0, 380.0, 60.0, 50.0), 0.91)]),
]
merged = merge_tile_detections(per_tile, [(0, 0), (924, 0)], nms_iou=0.5)
print(f"{sum(len(t.detections) for t in per_tile)} tile detections -> "
      f"{len(merged.detections)} frame detections:")
for d in merged.detections:
    b = d.bbox
    print(f"  ({b.x:.0f}, {b.y:.0f}, {b.w:.0f}, {b.h:.0f})  score {d.score}")
