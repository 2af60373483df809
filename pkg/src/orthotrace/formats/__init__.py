"""On-disk interchange formats: COCO/YOLO boxes, SfM scene files, GCP lists,
EXIF GPS blocks, and shapefile export."""

from .coco import (AnnotationSet, Annotation, BBox, Category, CocoError,
                   Detection, DetectionSet, ImageInfo, coco_to_yolo, iou,
                   read_coco, write_coco, yolo_to_coco)
from .exif import ExifError, ExifGpsRecord, read_exif, write_exif_gps
from .gcp_list import GcpEntry, GcpListError, read_gcp_list, write_gcp_list
from .reconstruction import (CameraIntrinsics, ReconstructionError, ShotPose,
                             read_geo_offset, read_reconstruction)
from .shapefile import ShapefileError, write_shapefile

__all__ = [
    "AnnotationSet", "Annotation", "BBox", "Category", "CocoError",
    "Detection", "DetectionSet", "ImageInfo", "coco_to_yolo", "iou",
    "read_coco", "write_coco", "yolo_to_coco",
    "ExifError", "ExifGpsRecord", "read_exif", "write_exif_gps",
    "GcpEntry", "GcpListError", "read_gcp_list", "write_gcp_list",
    "CameraIntrinsics", "ReconstructionError", "ShotPose", "read_geo_offset",
    "read_reconstruction",
    "ShapefileError", "write_shapefile",
]
