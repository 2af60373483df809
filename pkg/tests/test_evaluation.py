from itertools import permutations

import numpy as np
import pytest

from orthotrace.evaluation import (EvalError, average_precision, iou,
                                   match_greedy, mean_ap, pr_curve,
                                   projection_validation, size_bucket,
                                   size_stratified)
from orthotrace.formats.coco import (Annotation, AnnotationSet, BBox, Category,
                                     Detection, ImageInfo)


def gt(i, x, y, w, h, image_id=1, cat=1):
    return Annotation(i, image_id, cat, BBox(x, y, w, h))


def det(x, y, w, h, score, image_id=1, cat=1):
    return Detection(image_id, cat, BBox(x, y, w, h), score)


def ap_oracle(curve):
    """Direct 101-point interpolation, written against the definition."""
    if not curve:
        return 0.0
    recalls = np.array([r for r, _ in curve])
    precs = np.array([p for _, p in curve])
    vals = []
    for g in np.linspace(0.0, 1.0, 101):
        mask = recalls >= g - 1e-12
        vals.append(precs[mask].max() if mask.any() else 0.0)
    return float(np.mean(vals))


class TestIou:
    def test_identical(self):
        assert iou(BBox(3, 4, 10, 20), BBox(3, 4, 10, 20)) == 1.0

    def test_disjoint(self):
        assert iou(BBox(0, 0, 10, 10), BBox(50, 50, 10, 10)) == 0.0

    def test_quarter_offset(self):
        # intersection 1, union 4 + 4 - 1 = 7
        np.testing.assert_allclose(iou(BBox(0, 0, 2, 2), BBox(1, 1, 2, 2)),
                                   1.0 / 7.0)

    def test_contained(self):
        assert iou(BBox(0, 0, 2, 2), BBox(0, 0, 1, 1)) == 0.25

    def test_symmetric(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            a = BBox(*rng.uniform(0, 50, 2), *rng.uniform(1, 30, 2))
            b = BBox(*rng.uniform(0, 50, 2), *rng.uniform(1, 30, 2))
            assert iou(a, b) == iou(b, a)
            assert 0.0 <= iou(a, b) <= 1.0


class TestMatchGreedy:
    def test_single_pair_above_threshold(self):
        # IoU = 60*100/(2*100*100 - 6000) = 6000/14000 ... use a cleaner one:
        # det (0,0,10,10) vs gt (0,4,10,10): inter 60, union 140 -> 3/7 ~ 0.43
        # pick overlap 0.6: det (0,0,10,10), gt (0,2.5,10,10) ->
        #   inter 75, union 125 -> 0.6
        d = [det(0, 0, 10, 10, 0.9)]
        g = [gt(1, 0, 2.5, 10, 10)]
        m = match_greedy(d, g, iou_thr=0.5)
        assert (m.tp, m.fp, m.fn) == (1, 0, 0)
        assert m.pairs == [(0, 1, 0.6)]

    def test_same_pair_below_higher_threshold(self):
        d = [det(0, 0, 10, 10, 0.9)]
        g = [gt(1, 0, 2.5, 10, 10)]
        m = match_greedy(d, g, iou_thr=0.7)
        assert (m.tp, m.fp, m.fn) == (0, 1, 1)
        assert m.pairs == []

    def test_two_dets_one_gt_higher_score_wins(self):
        d = [det(0, 0, 10, 10, 0.6), det(0.5, 0.5, 10, 10, 0.95)]
        g = [gt(1, 0, 0, 10, 10)]
        m = match_greedy(d, g, iou_thr=0.5)
        assert (m.tp, m.fp, m.fn) == (1, 1, 0)
        assert m.pairs[0][:2] == (1, 1)       # det index 1 claimed the gt
        assert m.labels == [True, False]      # descending-score order
        assert m.order == [1, 0]

    def test_iou_tie_goes_to_lower_gt_id(self):
        # both gts overlap the det with IoU exactly 1/3
        d = [det(0, 0, 2, 2, 0.9)]
        g = [gt(5, 1, 0, 2, 2), gt(2, 0, 1, 2, 2)]
        m = match_greedy(d, g, iou_thr=0.2)
        assert m.pairs == [(0, 2, pytest.approx(1.0 / 3.0))]

    def test_category_and_image_respected(self):
        d = [det(0, 0, 10, 10, 0.9, cat=2), det(0, 0, 10, 10, 0.8, image_id=7)]
        g = [gt(1, 0, 0, 10, 10, cat=1, image_id=1)]
        m = match_greedy(d, g, iou_thr=0.5)
        assert (m.tp, m.fp, m.fn) == (0, 2, 1)

    def test_each_side_matched_at_most_once(self):
        rng = np.random.default_rng(23)
        g = [gt(i + 1, *rng.uniform(0, 200, 2), *rng.uniform(10, 40, 2))
             for i in range(30)]
        d = [det(a.bbox.x + rng.uniform(-5, 5), a.bbox.y + rng.uniform(-5, 5),
                 a.bbox.w, a.bbox.h, float(s))
             for a, s in zip(g * 2, rng.uniform(0.01, 1.0, 60))]
        m = match_greedy(d, g, iou_thr=0.3)
        assert m.tp == len(m.pairs)
        assert len({p[0] for p in m.pairs}) == len(m.pairs)
        assert len({p[1] for p in m.pairs}) == len(m.pairs)
        assert m.tp + m.fp == len(d)
        assert m.tp + m.fn == len(g)

    def test_equals_optimal_when_all_pairs_clear_threshold(self):
        # if every det-gt IoU clears the threshold, greedy matches
        # min(|det|, |gt|), the brute-force optimum over assignments
        rng = np.random.default_rng(31)
        for _ in range(20):
            nd, ng = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            g = [gt(i + 1, float(rng.uniform(0, 3)), float(rng.uniform(0, 3)),
                    20, 20) for i in range(ng)]
            d = [det(float(rng.uniform(0, 3)), float(rng.uniform(0, 3)),
                     20, 20, float(s))
                 for s in rng.uniform(0.1, 1.0, nd)]
            m = match_greedy(d, g, iou_thr=0.5)
            best = 0
            gt_ids = [a.id for a in g]
            for kperm in permutations(gt_ids, min(nd, ng)):
                best = max(best, len(kperm))
            assert m.tp == min(nd, ng) == best


class TestPrCurve:
    def test_perfect_single_detection(self):
        d = [det(0, 0, 10, 10, 1.0)]
        g = [gt(1, 0, 0, 10, 10)]
        points, f1 = pr_curve(d, g, iou_thr=0.5)
        assert points == [(1.0, 1.0)]
        assert f1 == 1.0

    def test_hand_swept_three_detections(self):
        g = [gt(1, 0, 0, 10, 10), gt(2, 100, 100, 10, 10)]
        d = [det(0, 0, 10, 10, 0.9),          # tp
             det(50, 50, 10, 10, 0.8),        # fp
             det(100, 100, 10, 10, 0.7)]      # tp
        points, f1 = pr_curve(d, g, iou_thr=0.5)
        np.testing.assert_allclose(
            points, [(0.5, 1.0), (0.5, 0.5), (1.0, 2.0 / 3.0)])
        # P=2/3, R=1 -> F1 = 2*(2/3)/(5/3) = 0.8
        np.testing.assert_allclose(f1, 0.8)

    def test_zero_detections(self):
        assert pr_curve([], [gt(1, 0, 0, 10, 10)]) == ([], 0.0)

    def test_empty_ground_truth_rejected(self):
        with pytest.raises(EvalError):
            pr_curve([det(0, 0, 10, 10, 0.9)], [])


class TestAveragePrecision:
    def test_perfect_curve(self):
        assert average_precision([(1.0, 1.0)]) == 1.0

    def test_hand_case_frozen(self):
        # exact rational sweep: (51*1 + 50*(2/3)) / 101 = 253/303
        curve = [(0.5, 1.0), (0.5, 0.5), (1.0, 2.0 / 3.0)]
        np.testing.assert_allclose(average_precision(curve), 253.0 / 303.0,
                                   rtol=1e-12)
        np.testing.assert_allclose(average_precision(curve),
                                   ap_oracle(curve), rtol=1e-12)

    def test_all_point_variant(self):
        # area under the envelope: 0.5*1.0 + 0.5*(2/3) = 5/6
        curve = [(0.5, 1.0), (0.5, 0.5), (1.0, 2.0 / 3.0)]
        np.testing.assert_allclose(average_precision(curve, all_point=True),
                                   5.0 / 6.0, rtol=1e-12)

    def test_empty_curve(self):
        assert average_precision([]) == 0.0

    def test_matches_oracle_on_random_scenes(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            g = [gt(i + 1, *(float(v) for v in rng.uniform(0, 500, 2)), 20, 20)
                 for i in range(int(rng.integers(3, 15)))]
            d = []
            for a in g:
                if rng.uniform() < 0.8:
                    d.append(det(a.bbox.x + float(rng.uniform(-8, 8)),
                                 a.bbox.y + float(rng.uniform(-8, 8)),
                                 20, 20, float(rng.uniform(0.05, 1.0))))
            for _ in range(int(rng.integers(0, 5))):
                d.append(det(*(float(v) for v in rng.uniform(600, 900, 2)),
                             20, 20, float(rng.uniform(0.05, 1.0))))
            if not d:
                continue
            curve, _ = pr_curve(d, g, iou_thr=0.5)
            np.testing.assert_allclose(average_precision(curve),
                                       ap_oracle(curve), rtol=1e-12)

    def test_invariant_to_positive_score_rescale(self):
        rng = np.random.default_rng(29)
        g = [gt(i + 1, float(i * 50), 0.0, 20, 20) for i in range(8)]
        d = [det(a.bbox.x + float(rng.uniform(-6, 6)), 0.0, 20, 20, float(s))
             for a, s in zip(g, rng.uniform(0.2, 1.0, 8))]
        d += [det(1000.0 + i * 50, 0.0, 20, 20, float(s))
              for i, s in enumerate(rng.uniform(0.2, 1.0, 4))]
        curve1, _ = pr_curve(d, g)
        scaled = [det(x.bbox.x, x.bbox.y, x.bbox.w, x.bbox.h, x.score * 0.5)
                  for x in d]
        curve2, _ = pr_curve(scaled, g)
        assert average_precision(curve1) == average_precision(curve2)


class TestMeanAp:
    def test_perfect_detections(self):
        g = [gt(i + 1, float(i * 50), 0.0, 20, 20) for i in range(5)]
        d = [det(a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h, 1.0) for a in g]
        out = mean_ap(d, g)
        assert out["ap50"] == 1.0
        assert out["map5095"] == 1.0
        assert [thr for thr, _ in out["per_iou"]] == \
            [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95]

    def test_fixed_jitter_separates_thresholds(self):
        # 100x100 boxes offset by (15,15): IoU = 85^2/(2*100^2-85^2) ~ 0.5656
        g = [gt(i + 1, float(i * 400), 0.0, 100, 100) for i in range(4)]
        d = [det(a.bbox.x + 15.0, 15.0, 100, 100, 0.9) for a in g]
        out = mean_ap(d, g)
        per = dict(out["per_iou"])
        assert out["ap50"] == 1.0
        assert per[0.55] == 1.0
        assert per[0.6] == 0.0
        assert per[0.9] == 0.0
        assert out["ap50"] > per[0.9]

    def test_per_iou_monotone_non_increasing(self):
        rng = np.random.default_rng(43)
        g = [gt(i + 1, *(float(v) for v in rng.uniform(0, 800, 2)), 30, 30)
             for i in range(20)]
        d = [det(a.bbox.x + float(rng.uniform(-10, 10)),
                 a.bbox.y + float(rng.uniform(-10, 10)),
                 30, 30, float(rng.uniform(0.05, 1.0))) for a in g]
        out = mean_ap(d, g)
        aps = [ap for _, ap in out["per_iou"]]
        assert all(a >= b - 1e-12 for a, b in zip(aps, aps[1:]))
        assert all(0.0 <= a <= 1.0 for a in aps)


class TestSizeBucket:
    def test_paper_thresholds(self):
        assert size_bucket(900.0) == "small"
        assert size_bucket(1023.99) == "small"
        assert size_bucket(1024.0) == "medium"     # boundary is medium
        assert size_bucket(9216.0) == "medium"     # boundary is medium
        assert size_bucket(10000.0) == "large"

    def test_stratified_counts(self):
        g = [gt(1, 0, 0, 20, 20),        # 400 px^2, small
             gt(2, 500, 0, 200, 200)]    # 40000 px^2, large
        d = [det(0, 0, 20, 20, 0.9), det(500, 0, 200, 200, 0.8)]
        out = size_stratified(d, g, iou_thr=0.5)
        assert out["small"]["gt"] == 1 and out["small"]["recall"] == 1.0
        assert out["large"]["gt"] == 1 and out["large"]["f1"] == 1.0
        assert out["medium"]["gt"] == 0 and out["medium"]["precision"] is None


def manual_set(boxes):
    return AnnotationSet(
        images=[ImageInfo(1, "ortho.jpg", 20000, 20000)],
        annotations=[gt(i + 1, *b) for i, b in enumerate(boxes)],
        categories=[Category(1, "plant")],
    )


class TestProjectionValidation:
    def test_all_perfect(self):
        boxes = [(float(i * 50), 0.0, 20.0, 20.0) for i in range(10)]
        out = projection_validation([BBox(*b) for b in boxes],
                                    manual_set(boxes))
        assert out["georef_rate"] == 1.0
        assert out["frac_iou_ge_thr"] == 1.0
        assert out["iou_histogram"][9] == 10
        assert sum(out["iou_histogram"]) == out["matched"]

    def test_partial_failures_rate(self):
        # 964 attempted, 98 failed at the DSM edge -> 866 ok, rate 0.898
        boxes = [(float((i % 40) * 30), float((i // 40) * 30), 12.0, 12.0)
                 for i in range(866)]
        projected = [BBox(*b) for b in boxes] + [None] * 98
        out = projection_validation(projected, manual_set(boxes))
        assert out["attempted"] == 964 and out["projected_ok"] == 866
        np.testing.assert_allclose(out["georef_rate"], 866.0 / 964.0)
        assert round(out["georef_rate"], 3) == 0.898
        assert out["frac_iou_ge_thr"] == 1.0

    def test_unmatched_projection_lowers_fraction(self):
        boxes = [(0.0, 0.0, 20.0, 20.0), (100.0, 0.0, 20.0, 20.0)]
        projected = [BBox(0, 0, 20, 20), BBox(500, 500, 20, 20)]
        out = projection_validation(projected, manual_set(boxes))
        assert out["frac_iou_ge_thr"] == 0.5
        assert sum(out["iou_histogram"]) == 1

    def test_histogram_mass_equals_matches(self):
        rng = np.random.default_rng(2)
        boxes = [(float(i * 40), 0.0, 20.0, 20.0) for i in range(30)]
        projected = []
        for b in boxes:
            if rng.uniform() < 0.2:
                projected.append(None)
            else:
                projected.append(BBox(b[0] + float(rng.uniform(0, 9)), b[1],
                                      b[2], b[3]))
        out = projection_validation(projected, manual_set(boxes))
        assert sum(out["iou_histogram"]) == out["matched"]
        assert 0.0 <= out["georef_rate"] <= 1.0

    def test_empty_input_rejected(self):
        with pytest.raises(EvalError):
            projection_validation([], manual_set([(0, 0, 1, 1)]))
