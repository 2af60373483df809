"""COCO JSON containers and YOLO text conversion.

YOLO line arithmetic for the hand example: box (x=100, y=200, w=50, h=80) in
a 1000x1000 image has center (125, 240), so normalized fields are
cx=0.125 cy=0.24 w=0.05 h=0.08.
"""

import json
import time

import numpy as np
import pytest

from orthotrace.formats import (
    Annotation,
    AnnotationSet,
    BBox,
    Category,
    CocoError,
    Detection,
    DetectionSet,
    ImageInfo,
    coco_to_yolo,
    read_coco,
    write_coco,
    yolo_to_coco,
)


def _one_box_set():
    return AnnotationSet(
        images=[ImageInfo(1, "a.jpg", 640, 480)],
        annotations=[Annotation(1, 1, 1, BBox(10.0, 20.0, 30.0, 40.0))],
        categories=[Category(1, "plant")],
    )


class TestCocoRoundTrip:
    def test_one_image_one_box(self, tmp_path):
        s = _one_box_set()
        write_coco(s, tmp_path / "a.json")
        s2 = read_coco(tmp_path / "a.json")
        assert s2.images == s.images
        assert s2.annotations == s.annotations
        assert s2.categories == s.categories

    def test_area_written(self, tmp_path):
        write_coco(_one_box_set(), tmp_path / "a.json")
        raw = json.loads((tmp_path / "a.json").read_text())
        assert raw["annotations"][0]["area"] == 30.0 * 40.0

    def test_unknown_keys_kept_on_read_dropped_on_write(self, tmp_path):
        payload = {
            "info": {"year": 2023},
            "licenses": [],
            "images": [{"id": 1, "file_name": "a.jpg", "width": 10, "height": 10,
                        "flickr_url": "x"}],
            "annotations": [],
            "categories": [{"id": 1, "name": "plant", "supercategory": "crop"}],
        }
        (tmp_path / "in.json").write_text(json.dumps(payload))
        s = read_coco(tmp_path / "in.json")
        assert s.extra["info"] == {"year": 2023}
        write_coco(s, tmp_path / "out.json")
        raw = json.loads((tmp_path / "out.json").read_text())
        assert "info" not in raw and "licenses" not in raw

    def test_detection_list(self, tmp_path):
        d = DetectionSet([Detection(1, 1, BBox(0.0, 0.0, 5.0, 5.0), 0.9),
                          Detection(1, 1, BBox(2.0, 2.0, 5.0, 5.0), 0.25)])
        write_coco(d, tmp_path / "d.json")
        d2 = read_coco(tmp_path / "d.json")
        assert isinstance(d2, DetectionSet)
        assert d2.detections == d.detections
        assert all(0.0 <= det.score <= 1.0 for det in d2.detections)

    def test_write_is_deterministic(self, tmp_path):
        s = _one_box_set()
        write_coco(s, tmp_path / "x.json")
        write_coco(s, tmp_path / "y.json")
        assert (tmp_path / "x.json").read_bytes() == (tmp_path / "y.json").read_bytes()


class TestValidation:
    def test_dangling_image_id(self):
        s = _one_box_set()
        s.annotations.append(Annotation(2, 99, 1, BBox(0, 0, 1, 1)))
        with pytest.raises(CocoError):
            s.validate()

    def test_dangling_category_id(self):
        s = _one_box_set()
        s.annotations.append(Annotation(2, 1, 42, BBox(0, 0, 1, 1)))
        with pytest.raises(CocoError):
            s.validate()

    def test_duplicate_annotation_id(self):
        s = _one_box_set()
        s.annotations.append(Annotation(1, 1, 1, BBox(0, 0, 1, 1)))
        with pytest.raises(CocoError):
            s.validate()

    def test_negative_box_dims(self):
        with pytest.raises(CocoError):
            BBox(0, 0, -1.0, 5.0)
        with pytest.raises(CocoError):
            BBox(0, 0, 5.0, 0.0)

    def test_score_range(self):
        with pytest.raises(CocoError):
            Detection(1, 1, BBox(0, 0, 1, 1), 1.5)

    def test_category_cap(self):
        s = AnnotationSet(images=[], annotations=[],
                          categories=[Category(i, f"c{i}") for i in range(6)])
        with pytest.raises(CocoError):
            s.validate()


class TestScale:
    def test_paper_scale_parse_under_a_second(self, tmp_path):
        # 964 boxes across a handful of frames; generous hardware margin.
        rng = np.random.default_rng(964)
        images = [{"id": i, "file_name": f"im{i}.jpg", "width": 5472, "height": 3648}
                  for i in range(10)]
        anns = []
        for k in range(964):
            x = float(rng.uniform(0, 5400))
            y = float(rng.uniform(0, 3580))
            anns.append({"id": k + 1, "image_id": int(k % 10) + 0,
                         "category_id": 1,
                         "bbox": [x, y, float(rng.uniform(8, 60)),
                                  float(rng.uniform(8, 60))],
                         "area": 1.0})
        payload = {"images": images, "annotations": anns,
                   "categories": [{"id": 1, "name": "plant"}]}
        p = tmp_path / "big.json"
        p.write_text(json.dumps(payload))
        t0 = time.perf_counter()
        s = read_coco(p)
        assert time.perf_counter() - t0 < 1.0
        assert len(s.annotations) == 964


class TestYolo:
    IMG = ImageInfo(1, "a.jpg", 1000, 1000)

    def _set_with(self, boxes):
        return AnnotationSet(
            images=[self.IMG],
            annotations=[Annotation(i + 1, 1, 1, b) for i, b in enumerate(boxes)],
            categories=[Category(1, "plant")],
        )

    def test_full_image_box(self):
        s = self._set_with([BBox(0, 0, 1000, 1000)])
        assert coco_to_yolo(s, self.IMG) == ["0 0.5 0.5 1.0 1.0"]

    def test_hand_example(self):
        s = self._set_with([BBox(100, 200, 50, 80)])
        assert coco_to_yolo(s, self.IMG) == ["0 0.125 0.24 0.05 0.08"]

    def test_class_index_is_category_rank(self):
        s = AnnotationSet(
            images=[self.IMG],
            annotations=[Annotation(1, 1, 7, BBox(0, 0, 10, 10)),
                         Annotation(2, 1, 3, BBox(20, 20, 10, 10))],
            categories=[Category(3, "a"), Category(7, "b")],
        )
        lines = coco_to_yolo(s, self.IMG)
        assert lines[0].split()[0] == "1"      # category 7 is rank 1
        assert lines[1].split()[0] == "0"

    def test_round_trip_within_half_pixel(self):
        rng = np.random.default_rng(42)
        boxes = []
        for _ in range(200):
            w = float(rng.uniform(1.0, 400.0))
            h = float(rng.uniform(1.0, 400.0))
            x = float(rng.uniform(0.0, 1000.0 - w))
            y = float(rng.uniform(0.0, 1000.0 - h))
            boxes.append(BBox(x, y, w, h))
        s = self._set_with(boxes)
        lines = coco_to_yolo(s, self.IMG)
        back = yolo_to_coco(lines, self.IMG, categories=s.categories)
        for orig, rec in zip(boxes, back.annotations):
            b = rec.bbox
            for got, want in ((b.x, orig.x), (b.y, orig.y),
                              (b.w, orig.w), (b.h, orig.h)):
                assert abs(got - want) < 0.5

    def test_malformed_line_rejected(self):
        with pytest.raises(CocoError):
            yolo_to_coco(["0 0.5 0.5 1.0"], self.IMG)
        with pytest.raises(CocoError):
            yolo_to_coco(["3 0.5 0.5 0.1 0.1"], self.IMG,
                         categories=[Category(1, "plant")])
