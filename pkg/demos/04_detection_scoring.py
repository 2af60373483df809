"""Detection scoring walkthrough: greedy matching, the precision-recall
sweep, AP/mAP, size buckets, and the projected-vs-manual validation
report.

    python3 demos/04_detection_scoring.py
"""

from orthotrace.evaluation import (match_greedy, mean_ap, pr_curve,
                                   average_precision, projection_validation,
                                   size_bucket, size_stratified)
from orthotrace.formats.coco import (Annotation, AnnotationSet, BBox,
                                     Category, Detection, DetectionSet,
                                     ImageInfo)

# ---------------------------------------------------------------------------
# A hand-sized scene: four true plants, five detections. Detection d4 is
# a duplicate of an already-claimed plant and d5 is a miss, so the sweep
# shows precision decaying as lower-confidence boxes are admitted.
# ---------------------------------------------------------------------------

image = ImageInfo(1, "plot.jpg", 1000, 1000)
gts = AnnotationSet(
    [image],
    [Annotation(1, 1, 1, BBox(100, 100, 40, 40)),
     Annotation(2, 1, 1, BBox(300, 120, 36, 44)),
     Annotation(3, 1, 1, BBox(520, 400, 50, 30)),
     Annotation(4, 1, 1, BBox(700, 650, 44, 44))],
    [Category(1, "plant")])
dets = DetectionSet([
    Detection(1, 1, BBox(102, 103, 40, 38), 0.95),   # hits gt 1
    Detection(1, 1, BBox(301, 121, 36, 43), 0.90),   # hits gt 2
    Detection(1, 1, BBox(524, 401, 47, 30), 0.80),   # hits gt 3
    Detection(1, 1, BBox(108, 96, 42, 40), 0.60),    # duplicate of gt 1
    Detection(1, 1, BBox(850, 100, 40, 40), 0.40),   # misses everything
])

m = match_greedy(dets, gts, iou_thr=0.5)
print(f"matching: {m.tp} TP, {m.fp} FP, {m.fn} FN")
for det_idx, gt_id, v in m.pairs:
    print(f"  detection {det_idx} -> plant {gt_id}  IoU {v:.3f}")

points, f1 = pr_curve(dets, gts, iou_thr=0.5)
print("\nprecision-recall sweep (descending score):")
for rec, prec in points:
    print(f"  recall {rec:.2f}  precision {prec:.2f}")
print(f"end-of-sweep F1 {f1:.3f}")
print(f"AP@0.5 (101-point) {average_precision(points):.4f}")

out = mean_ap(dets, gts)
print(f"mAP@[0.5:0.95] {out['map5095']:.4f} "
      f"(AP@0.5 {out['ap50']:.4f}, AP@0.75 {dict(out['per_iou'])[0.75]:.4f})\n")

# ---------------------------------------------------------------------------
# Size strata: plot-level metrics hide how badly small plants fare, so
# boxes are bucketed by area before scoring.
# ---------------------------------------------------------------------------

print(f"bucket(30x30 = 900 px^2)   -> {size_bucket(900.0)}")
print(f"bucket(100x100 = 10000)    -> {size_bucket(10000.0)}")
strata = size_stratified(dets, gts, iou_thr=0.5)
for name, row in strata.items():
    if row["gt"]:
        print(f"  {name}: {row['gt']} gts, {row['det']} dets, "
              f"recall {row['recall']:.2f}")
print()

# ---------------------------------------------------------------------------
# Projection validation: after forward-projecting detections onto the
# orthomosaic, compare them against hand-drawn reference boxes. The report
# separates "how many projections succeeded" (georef_rate) from "how many
# landed on their reference" (frac_iou_ge_thr).
# ---------------------------------------------------------------------------

manual = AnnotationSet(
    [ImageInfo(1, "ortho.jpg", 4000, 4000)],
    [Annotation(k + 1, 1, 1, BBox(200.0 * k + 100, 300.0, 60.0, 60.0))
     for k in range(8)],
    [Category(1, "plant")])
projected = [
    BBox(100.0, 300.0, 60.0, 60.0),      # exact
    BBox(305.0, 302.0, 58.0, 60.0),      # close
    BBox(540.0, 330.0, 60.0, 60.0),      # drifted below the 0.5 bar
    None,                                # failed to georeference
    BBox(900.0, 300.0, 60.0, 60.0),      # exact
    BBox(1100.0, 300.0, 62.0, 58.0),     # close
    None,                                # failed
    BBox(1500.0, 301.0, 60.0, 60.0),     # close
]
report = projection_validation(projected, manual, iou_thr=0.5)
print(f"validation: {report['projected_ok']}/{report['attempted']} "
      f"georeferenced ({report['georef_rate'] * 100:.1f}%), "
      f"{report['matched']} matched at IoU>=0.5 "
      f"({report['frac_iou_ge_thr'] * 100:.1f}% of successes)")
print(f"IoU histogram (10 bins over matched pairs): "
      f"{report['iou_histogram']}")
