import numpy as np
import pytest

from orthotrace.formats.coco import (Annotation, AnnotationSet, BBox, Category,
                                     Detection, DetectionSet, ImageInfo, iou)
from orthotrace.tiler import (TileRect, TileSpec, TilerError, clip_annotations,
                              merge_tile_detections, records_to_annotation_set,
                              split_counts, split_dataset, tile_grid,
                              tile_image)

DEFAULT = TileSpec()


def ann(i, x, y, w, h, image_id=1, cat=1):
    return Annotation(i, image_id, cat, BBox(x, y, w, h))


class TestGrid:
    def test_survey_frame_is_24_tiles(self):
        # 5472 wide, stride 924: starts 0,924,1848,2772,3696 then the
        # tail shifted to 5472-1024 = 4448 -> 6 columns; 3648 high -> 4 rows
        rects = tile_grid(5472, 3648, DEFAULT)
        assert len(rects) == 24
        xs = sorted({r.x for r in rects})
        ys = sorted({r.y for r in rects})
        assert xs == [0, 924, 1848, 2772, 3696, 4448]
        assert ys == [0, 924, 1848, 2624]
        assert all((r.w, r.h) == (1024, 1024) for r in rects)

    def test_row_major_order(self):
        rects = tile_grid(5472, 3648, DEFAULT)
        assert (rects[0].x, rects[0].y) == (0, 0)
        assert (rects[1].x, rects[1].y) == (924, 0)
        assert (rects[6].x, rects[6].y) == (0, 924)

    def test_exact_fit_single_tile(self):
        assert tile_grid(1024, 1024, DEFAULT) == [TileRect(0, 0, 1024, 1024)]

    def test_small_image_single_shrunk_tile(self):
        assert tile_grid(800, 600, DEFAULT) == [TileRect(0, 0, 800, 600)]

    def test_image_not_larger_than_overlap(self):
        with pytest.raises(TilerError, match="overlap"):
            tile_grid(100, 3648, DEFAULT)

    def test_full_coverage_no_padding(self):
        rng = np.random.default_rng(41)
        for _ in range(25):
            w = int(rng.integers(150, 7000))
            h = int(rng.integers(150, 7000))
            spec = TileSpec(tile_w=512, tile_h=384, overlap=96,
                            min_retention=0.3)
            rects = tile_grid(w, h, spec)
            mask = np.zeros((h, w), dtype=bool)
            for r in rects:
                assert r.x >= 0 and r.y >= 0
                assert r.x + r.w <= w and r.y + r.h <= h
                mask[r.y:r.y + r.h, r.x:r.x + r.w] = True
            assert mask.all()

    def test_bad_spec_rejected(self):
        with pytest.raises(TilerError):
            TileSpec(overlap=1024)
        with pytest.raises(TilerError):
            TileSpec(overlap=-1)
        with pytest.raises(TilerError):
            TileSpec(min_retention=0.0)
        with pytest.raises(TilerError):
            TileSpec(tile_w=0)


class TestClip:
    def test_interior_box_translated(self):
        rect = TileRect(924, 0, 1024, 1024)
        clipped, prov = clip_annotations([ann(7, 1000, 50, 40, 30)], rect,
                                         DEFAULT)
        [c] = clipped
        assert c.bbox == BBox(76.0, 50.0, 40.0, 30.0)
        assert c.id == 1 and prov == {1: 7}

    def test_retention_boundary_inclusive(self):
        # box 10x20 hangs above the tile: 6 of 20 rows remain -> ratio 0.30
        rect = TileRect(0, 0, 100, 100)
        kept, _ = clip_annotations([ann(1, 10, -14, 10, 20)], rect, DEFAULT)
        assert len(kept) == 1
        assert kept[0].bbox == BBox(10.0, 0.0, 10.0, 6.0)

    def test_retention_below_threshold_dropped(self):
        # 5 of 20 rows remain -> ratio 0.25 < 0.30
        rect = TileRect(0, 0, 100, 100)
        kept, _ = clip_annotations([ann(1, 10, -15, 10, 20)], rect, DEFAULT)
        assert kept == []

    def test_sliver_dropped_by_min_box_px(self):
        # 60% of the box survives, but only 3 px wide
        rect = TileRect(0, 0, 100, 100)
        kept, _ = clip_annotations([ann(1, 97, 10, 5, 50)], rect, DEFAULT)
        assert kept == []

    def test_disjoint_box_dropped(self):
        rect = TileRect(0, 0, 100, 100)
        kept, prov = clip_annotations([ann(1, 500, 500, 10, 10)], rect, DEFAULT)
        assert kept == [] and prov == {}

    def test_ids_continue_from_next_id(self):
        rect = TileRect(0, 0, 100, 100)
        kept, prov = clip_annotations([ann(5, 1, 1, 4, 4), ann(9, 20, 20, 4, 4)],
                                      rect, DEFAULT, next_id=40)
        assert [c.id for c in kept] == [40, 41]
        assert prov == {40: 5, 41: 9}


def small_scene():
    image = ImageInfo(1, "plot.jpg", 2048, 1024)
    aset = AnnotationSet(
        images=[image],
        annotations=[
            ann(1, 100, 100, 50, 40),         # tile x0 only
            ann(2, 1000, 500, 60, 60),        # straddles the x=924 tile seam
            ann(3, 1800, 200, 30, 30),        # right edge tiles only
        ],
        categories=[Category(1, "plant")],
    )
    return aset, image


class TestTileImage:
    def test_names_encode_origin(self):
        aset, image = small_scene()
        records = tile_image(aset, image, DEFAULT)
        assert [r.name for r in records][:2] == ["plot_x0_y0", "plot_x924_y0"]
        # 2048 wide: starts 0, 924, then the tail shifted to 2048-1024 = 1024
        assert [r.rect.x for r in records] == [0, 924, 1024]

    def test_straddling_box_lands_on_both_tiles(self):
        aset, image = small_scene()
        records = tile_image(aset, image, DEFAULT)
        by_name = {r.name: r for r in records}
        left = by_name["plot_x0_y0"]
        # source ann 2 spans x 1000..1060; left tile keeps nothing of it
        # (24/60 = 0.4 of the width -> area ratio 0.4 >= 0.3, kept!)
        assert 2 in set(left.provenance.values())
        mid = by_name["plot_x924_y0"]
        assert 2 in set(mid.provenance.values())

    def test_all_source_ids_survive_somewhere(self):
        aset, image = small_scene()
        records = tile_image(aset, image, DEFAULT)
        seen = set()
        for r in records:
            seen.update(r.provenance.values())
        assert seen == {1, 2, 3}


class TestSplit:
    def test_counts_100(self):
        assert split_counts(100, (0.70, 0.15, 0.15)) == (70, 15, 15)

    def test_counts_10(self):
        # boundaries: rhu(7.0)=7, rhu(8.5)=9 -> 7/2/1
        assert split_counts(10, (0.70, 0.15, 0.15)) == (7, 2, 1)

    def test_counts_3(self):
        assert split_counts(3, (0.70, 0.15, 0.15)) == (2, 1, 0)

    def test_counts_sum_property(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            n = int(rng.integers(3, 500))
            raw = rng.uniform(0.05, 1.0, size=3)
            ratios = tuple(raw / raw.sum())
            a, b, c = split_counts(n, ratios)
            assert a + b + c == n
            assert min(a, b, c) >= 0

    def _tiles(self, n_sources=10, tiles_per=6):
        out = []
        for s in range(n_sources):
            img = ImageInfo(s + 1, f"img{s:02d}.jpg", 4000, 3000)
            for t in range(tiles_per):
                out.append(tile_image(
                    AnnotationSet(images=[img],
                                  categories=[Category(1, "plant")]),
                    img, DEFAULT)[t])
        return out

    def test_deterministic_for_seed(self):
        tiles = self._tiles()
        a = split_dataset(tiles, seed=4)
        b = split_dataset(tiles, seed=4)
        assert [t.name for t in a[0]] == [t.name for t in b[0]]
        assert [t.name for t in a[2]] == [t.name for t in b[2]]

    def test_seed_changes_assignment(self):
        tiles = self._tiles()
        a = split_dataset(tiles, seed=1)
        b = split_dataset(tiles, seed=2)
        assert [t.name for t in a[0]] != [t.name for t in b[0]]

    def test_partition_counts(self):
        tiles = self._tiles()        # 60 tiles -> 42/9/9
        train, val, test = split_dataset(tiles)
        assert (len(train), len(val), len(test)) == (42, 9, 9)
        names = sorted(t.name for t in train + val + test)
        assert names == sorted(t.name for t in tiles)

    def test_group_by_source_keeps_frames_together(self):
        tiles = self._tiles(n_sources=10, tiles_per=6)
        train, val, test = split_dataset(tiles, seed=0, group_by_source=True)
        sources = [set(t.source.file_name for t in part)
                   for part in (train, val, test)]
        assert not (sources[0] & sources[1])
        assert not (sources[0] & sources[2])
        assert not (sources[1] & sources[2])
        # 10 sources -> 7/2/1 frames
        assert tuple(len(s) for s in sources) == (7, 2, 1)

    def test_too_few_tiles(self):
        tiles = self._tiles(n_sources=1, tiles_per=2)
        with pytest.raises(TilerError, match="source images"):
            split_dataset(tiles, group_by_source=True)
        with pytest.raises(TilerError):
            split_dataset(tiles[:2])

    def test_bad_ratios(self):
        tiles = self._tiles()
        with pytest.raises(TilerError, match="sum"):
            split_dataset(tiles, ratios=(0.5, 0.1, 0.1))


class TestRecordsToAnnotationSet:
    def test_renumbers_globally(self):
        aset, image = small_scene()
        records = tile_image(aset, image, DEFAULT)
        out = records_to_annotation_set(records, DEFAULT,
                                        [Category(1, "plant")])
        assert [im.id for im in out.images] == [1, 2, 3]
        assert [a.id for a in out.annotations] == \
            list(range(1, len(out.annotations) + 1))
        assert {im.file_name for im in out.images} == \
            {"plot_x0_y0.jpg", "plot_x924_y0.jpg", "plot_x1024_y0.jpg"}


def det(x, y, w, h, score, cat=1, image_id=1):
    return Detection(image_id, cat, BBox(x, y, w, h), score)


class TestMerge:
    def test_duplicate_from_overlap_suppressed(self):
        # the same plant seen by two neighbouring tiles
        a = DetectionSet([det(950, 950, 100, 100, 0.9)])
        b = DetectionSet([det(26, 26, 100, 100, 0.8)])
        merged = merge_tile_detections([a, b], [(0, 0), (924, 924)])
        assert len(merged.detections) == 1
        kept = merged.detections[0]
        assert kept.score == 0.9
        assert kept.bbox == BBox(950.0, 950.0, 100.0, 100.0)

    def test_distinct_plants_all_kept(self):
        a = DetectionSet([det(10, 10, 50, 50, 0.9), det(500, 10, 50, 50, 0.7)])
        b = DetectionSet([det(10, 10, 50, 50, 0.8)])
        merged = merge_tile_detections([a, b], [(0, 0), (924, 0)])
        xs = sorted(d.bbox.x for d in merged.detections)
        assert xs == [10.0, 500.0, 934.0]

    def test_equal_score_tie_prefers_complete_box(self):
        # one plant straddling a tile seam: the right tile sees it whole,
        # the left tile a right-clipped copy with the same upper-left corner
        left = DetectionSet([det(940, 10, 44, 50, 0.9)])     # clipped at 984
        right = DetectionSet([det(16, 10, 60, 50, 0.9)])     # complete
        merged = merge_tile_detections([left, right], [(0, 0), (924, 0)])
        assert [(d.bbox.x, d.bbox.w) for d in merged.detections] \
            == [(940.0, 60.0)]

    def test_categories_do_not_suppress_each_other(self):
        a = DetectionSet([det(10, 10, 50, 50, 0.9, cat=1),
                          det(10, 10, 50, 50, 0.8, cat=2)])
        merged = merge_tile_detections([a], [(0, 0)])
        assert len(merged.detections) == 2

    def test_origin_count_mismatch(self):
        with pytest.raises(TilerError):
            merge_tile_detections([DetectionSet([])], [(0, 0), (1, 1)])

    def test_kept_set_is_valid_nms(self):
        # every dropped box must overlap a kept, not-lower-scored box of
        # its own category; kept boxes must be mutually below the threshold
        rng = np.random.default_rng(8)
        dets = [det(float(x), float(y), float(w), float(h), float(s),
                    cat=int(c))
                for x, y, w, h, s, c in zip(
                    rng.uniform(0, 400, 80), rng.uniform(0, 400, 80),
                    rng.uniform(20, 80, 80), rng.uniform(20, 80, 80),
                    rng.uniform(0.1, 1.0, 80), rng.integers(1, 3, 80))]
        merged = merge_tile_detections([DetectionSet(dets)], [(0, 0)],
                                       nms_iou=0.4)
        kept = merged.detections
        for i, k in enumerate(kept):
            for other in kept[i + 1:]:
                if other.category_id == k.category_id:
                    assert iou(k.bbox, other.bbox) < 0.4
        kept_keys = {(d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h, d.category_id)
                     for d in kept}
        for d in dets:
            key = (d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h, d.category_id)
            if key in kept_keys:
                continue
            assert any(k.category_id == d.category_id
                       and k.score >= d.score
                       and iou(k.bbox, d.bbox) >= 0.4 for k in kept)

    def test_tile_then_merge_recovers_isolated_boxes(self):
        # well-separated boxes smaller than the overlap are fully visible in
        # at least one tile; keeping only fully-contained copies
        # (min_retention 1.0) and merging perfect per-tile detections must
        # reproduce every source box exactly once; integer coordinates keep
        # the clip arithmetic exact so "fully contained" really is ratio 1.0
        rng = np.random.default_rng(19)
        anns = []
        i = 1
        for gy in range(9):
            for gx in range(11):
                x = gx * 260 + int(rng.integers(0, 100))
                y = gy * 260 + int(rng.integers(0, 100))
                w = int(rng.integers(8, 61))
                h = int(rng.integers(8, 61))
                anns.append(ann(i, x, y, w, h))
                i += 1
        image = ImageInfo(1, "field.jpg", 3000, 2500)
        aset = AnnotationSet(images=[image], annotations=anns,
                             categories=[Category(1, "plant")])
        spec = TileSpec(min_retention=1.0, min_box_px=1.0)
        records = tile_image(aset, image, spec)
        per_tile = [DetectionSet([Detection(1, a.category_id, a.bbox, 1.0)
                                  for a in r.annotations]) for r in records]
        origins = [(r.rect.x, r.rect.y) for r in records]
        merged = merge_tile_detections(per_tile, origins, nms_iou=0.99)
        got = sorted((d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h)
                     for d in merged.detections)
        want = sorted((a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h) for a in anns)
        assert got == want
