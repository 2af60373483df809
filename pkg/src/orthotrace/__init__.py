"""orthotrace: geo-reference UAV plant detections back onto map coordinates.

The package covers the ground pipeline around a single-plant detector:
embedding GNSS fixes into camera EXIF, picking ground control points,
choosing a minimal image subset for orthomosaic builds, tiling large frames
for training, projecting per-image detection boxes through the camera poses
onto a surface model, scoring detections against references, and turning
projected boxes into per-plot trait tables.

All raster math uses one convention: pixel (0, 0) addresses the *center* of
the top-left cell.
"""

__version__ = "0.1.0"
