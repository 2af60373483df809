"""Detection scoring: greedy IoU matching, PR curves, AP@0.5, mAP@[0.5:0.95],
size buckets, and projection-vs-manual validation.

Matching follows the usual COCO conventions: detections are visited in
descending score order, each claiming the not-yet-matched ground-truth box of
the same category with the highest IoU at or above the threshold (IoU ties go
to the lower ground-truth id). AP uses 101-point interpolation. Metrics here
pool detections across categories (the pipeline's use case is a single-class
problem); no score cut is applied internally — callers filter first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .formats.coco import (Annotation, AnnotationSet, BBox, Detection,
                           DetectionSet, iou)

__all__ = ["EvalError", "MatchResult", "iou", "match_greedy", "pr_curve",
           "average_precision", "mean_ap", "size_bucket", "size_stratified",
           "projection_validation", "MAP_IOU_THRESHOLDS"]

MAP_IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
SMALL_MAX = 1024.0        # areas below this are "small"
MEDIUM_MAX = 9216.0       # areas above this are "large"; both bounds medium


class EvalError(ValueError):
    """Metric requested on inputs where it is undefined."""


@dataclass
class MatchResult:
    tp: int
    fp: int
    fn: int
    pairs: list[tuple[int, int, float]]     # (det index, gt id, iou)
    labels: list[bool] = field(default_factory=list)  # per det, by desc score
    order: list[int] = field(default_factory=list)    # det indices, by desc score


def _dets_list(dets) -> list[Detection]:
    return dets.detections if isinstance(dets, DetectionSet) else list(dets)


def _gts_list(gts) -> list[Annotation]:
    return gts.annotations if isinstance(gts, AnnotationSet) else list(gts)


def match_greedy(dets, gts, iou_thr: float = 0.5) -> MatchResult:
    """Greedy score-ordered matching of detections to ground truth."""
    det_list = _dets_list(dets)
    gt_list = _gts_list(gts)
    order = sorted(range(len(det_list)),
                   key=lambda i: (-det_list[i].score, i))
    claimed: set[int] = set()
    pairs = []
    labels = []
    for i in order:
        d = det_list[i]
        best = None
        for g in gt_list:
            if g.id in claimed or g.image_id != d.image_id \
                    or g.category_id != d.category_id:
                continue
            v = iou(d.bbox, g.bbox)
            if v < iou_thr:
                continue
            # higher IoU wins; exact ties go to the lower gt id
            if best is None or v > best[1] or (v == best[1] and g.id < best[0]):
                best = (g.id, v)
        if best is None:
            labels.append(False)
        else:
            claimed.add(best[0])
            pairs.append((i, best[0], best[1]))
            labels.append(True)
    tp = len(pairs)
    return MatchResult(tp=tp, fp=len(det_list) - tp, fn=len(gt_list) - tp,
                       pairs=pairs, labels=labels, order=order)


def pr_curve(dets, gts, iou_thr: float = 0.5) \
        -> tuple[list[tuple[float, float]], float]:
    """Cumulative (recall, precision) sweep over descending score, plus F1 at
    the end of the sweep (all detections admitted)."""
    gt_list = _gts_list(gts)
    if not gt_list:
        raise EvalError("PR curve undefined without ground truth")
    m = match_greedy(dets, gts, iou_thr)
    points = []
    tp = fp = 0
    for is_tp in m.labels:
        if is_tp:
            tp += 1
        else:
            fp += 1
        points.append((tp / len(gt_list), tp / (tp + fp)))
    if not points:
        return [], 0.0
    recall, precision = points[-1]
    f1 = 0.0 if recall + precision == 0 \
        else 2 * precision * recall / (precision + recall)
    return points, f1


def average_precision(curve: list[tuple[float, float]],
                      all_point: bool = False) -> float:
    """101-point interpolated AP: mean over r in {0, 0.01, ..., 1} of the
    maximum precision among points with recall >= r. With ``all_point`` the
    area under the precision envelope is integrated exactly instead."""
    if not curve:
        return 0.0
    if all_point:
        total = 0.0
        prev_r = 0.0
        for rec in sorted({r for r, _ in curve}):
            best = max(p for r, p in curve if r >= rec)
            total += (rec - prev_r) * best
            prev_r = rec
        return total
    total = 0.0
    for k in range(101):
        r = k / 100.0
        best = 0.0
        for rec, prec in curve:
            if rec >= r - 1e-12 and prec > best:
                best = prec
        total += best
    return total / 101.0


def mean_ap(dets, gts) -> dict:
    """AP at each IoU threshold in 0.50:0.05:0.95 plus their mean."""
    per_iou = []
    for thr in MAP_IOU_THRESHOLDS:
        curve, _ = pr_curve(dets, gts, thr)
        per_iou.append((thr, average_precision(curve)))
    ap50 = per_iou[0][1]
    return {"ap50": ap50,
            "map5095": sum(ap for _, ap in per_iou) / len(per_iou),
            "per_iou": per_iou}


def size_bucket(area: float) -> str:
    """COCO-style area strata; both boundaries land in 'medium'."""
    if area < SMALL_MAX:
        return "small"
    if area <= MEDIUM_MAX:
        return "medium"
    return "large"


def size_stratified(dets, gts, iou_thr: float = 0.5) -> dict:
    """Per-bucket counts and end-of-sweep precision/recall/F1, where each
    bucket keeps the ground truth of that size and the detections of that
    size (a simplification of COCO's ignore machinery, stated as such)."""
    det_list = _dets_list(dets)
    gt_list = _gts_list(gts)
    out = {}
    for bucket in ("small", "medium", "large"):
        b_gts = [g for g in gt_list if size_bucket(g.bbox.area) == bucket]
        b_dets = [d for d in det_list if size_bucket(d.bbox.area) == bucket]
        if not b_gts:
            out[bucket] = {"gt": 0, "det": len(b_dets), "precision": None,
                           "recall": None, "f1": None}
            continue
        m = match_greedy(b_dets, b_gts, iou_thr)
        precision = m.tp / (m.tp + m.fp) if (m.tp + m.fp) else 0.0
        recall = m.tp / (m.tp + m.fn)
        f1 = 0.0 if precision + recall == 0 \
            else 2 * precision * recall / (precision + recall)
        out[bucket] = {"gt": len(b_gts), "det": len(b_dets),
                       "precision": precision, "recall": recall, "f1": f1}
    return out


def projection_validation(projected: list[BBox | None], manual: AnnotationSet,
                          iou_thr: float = 0.5) -> dict:
    """Score projected boxes against manual references on the same frame.

    ``projected`` holds one entry per attempted projection, ``None`` where
    projection failed; georef_rate = successful/attempted. Successful boxes
    are greedily matched to the manual set at ``iou_thr``;
    frac_iou_ge_thr = matched/successful. The histogram (10 bins over [0,1])
    covers matched pairs' IoU values, so its mass equals the match count.
    """
    if not projected:
        raise EvalError("no projections supplied")
    ok = [b for b in projected if b is not None]
    georef_rate = len(ok) / len(projected)
    if manual.images:
        image_id = manual.images[0].id
    elif manual.annotations:
        image_id = manual.annotations[0].image_id
    else:
        raise EvalError("manual reference set is empty")
    cat = manual.categories[0].id if manual.categories \
        else (manual.annotations[0].category_id if manual.annotations else 1)
    dets = [Detection(image_id, cat, b, 1.0) for b in ok]
    m = match_greedy(dets, manual.annotations, iou_thr)
    hist = [0] * 10
    for _, _, v in m.pairs:
        hist[min(int(v * 10), 9)] += 1
    return {
        "attempted": len(projected),
        "projected_ok": len(ok),
        "georef_rate": georef_rate,
        "matched": m.tp,
        "frac_iou_ge_thr": (m.tp / len(ok)) if ok else 0.0,
        "iou_histogram": hist,
    }
