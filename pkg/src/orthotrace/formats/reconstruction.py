"""Readers for the SfM scene files a photogrammetry run leaves behind:
``reconstruction.json`` (cameras + per-shot poses) and the two-line geo
offset file anchoring the local scene frame to a map projection.

Conventions in the JSON:

* top level is a list of partial reconstructions; only the first is used
* ``cameras`` maps a camera key to intrinsics with ``focal`` normalized by
  ``max(width, height)``
* each shot carries ``rotation`` (axis-angle) and ``translation`` for the
  world-to-camera transform ``p_cam = R @ p_world + t``
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..raster import RasterCrs

log = logging.getLogger(__name__)


class ReconstructionError(ValueError):
    """Scene file missing, malformed, or using an unsupported camera model."""


@dataclass(frozen=True)
class CameraIntrinsics:
    key: str
    width: int
    height: int
    focal: float                  # normalized by max(width, height)
    k1: float = 0.0
    k2: float = 0.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ReconstructionError(f"camera {self.key!r}: non-positive dimensions")
        if not (self.focal > 0 and math.isfinite(self.focal)):
            raise ReconstructionError(f"camera {self.key!r}: focal must be positive")

    @property
    def focal_px(self) -> float:
        return self.focal * max(self.width, self.height)


@dataclass(frozen=True)
class ShotPose:
    image_name: str
    camera_key: str
    rotation: tuple[float, float, float]      # axis-angle, radians
    translation: tuple[float, float, float]

    def __post_init__(self):
        angle = math.hypot(*self.rotation)
        if not angle <= math.pi + 1e-9:
            raise ReconstructionError(
                f"shot {self.image_name!r}: rotation magnitude {angle:.6f} > pi")
        if not all(math.isfinite(v) for v in self.rotation + self.translation):
            raise ReconstructionError(f"shot {self.image_name!r}: non-finite pose")

    def rotation_matrix(self) -> np.ndarray:
        """Rodrigues form of the axis-angle vector."""
        r = np.asarray(self.rotation, dtype=np.float64)
        angle = float(np.linalg.norm(r))
        if angle < 1e-12:
            return np.eye(3)
        k = r / angle
        kx = np.array([[0.0, -k[2], k[1]],
                       [k[2], 0.0, -k[0]],
                       [-k[1], k[0], 0.0]])
        return np.eye(3) + math.sin(angle) * kx + (1.0 - math.cos(angle)) * (kx @ kx)


def read_reconstruction(path: str | Path) \
        -> tuple[dict[str, CameraIntrinsics], list[ShotPose]]:
    """Parse the first reconstruction in the file."""
    with open(path) as f:
        data = json.load(f)
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list) or not data:
        raise ReconstructionError("reconstruction file holds no reconstructions")
    rec = data[0]

    cameras: dict[str, CameraIntrinsics] = {}
    for key, cam in rec.get("cameras", {}).items():
        ptype = cam.get("projection_type", "perspective")
        if ptype not in ("perspective", "brown"):
            raise ReconstructionError(
                f"camera {key!r}: unsupported projection type {ptype!r} "
                "(only perspective models are handled)")
        intr = CameraIntrinsics(key=key,
                                width=int(cam["width"]), height=int(cam["height"]),
                                focal=float(cam["focal"]),
                                k1=float(cam.get("k1", 0.0)),
                                k2=float(cam.get("k2", 0.0)))
        if intr.k1 != 0.0 or intr.k2 != 0.0:
            log.warning("camera %r has distortion k1=%g k2=%g; projections assume "
                        "undistorted imagery and ignore these", key, intr.k1, intr.k2)
        cameras[key] = intr
    if not cameras:
        raise ReconstructionError("reconstruction has no cameras")

    shots: list[ShotPose] = []
    for name, shot in rec.get("shots", {}).items():
        cam_key = shot.get("camera")
        if cam_key not in cameras:
            raise ReconstructionError(f"shot {name!r} references missing camera "
                                      f"{cam_key!r}")
        shots.append(ShotPose(image_name=name, camera_key=cam_key,
                              rotation=tuple(float(v) for v in shot["rotation"]),
                              translation=tuple(float(v) for v in shot["translation"])))
    if not shots:
        raise ReconstructionError("reconstruction has no shots")
    shots.sort(key=lambda s: s.image_name)
    return cameras, shots


def read_geo_offset(path: str | Path) -> tuple[RasterCrs, float, float]:
    """Two-line offset file: projection tag, then the easting/northing offset
    subtracted from world coordinates to form the local scene frame."""
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if len(lines) < 2:
        raise ReconstructionError("geo offset file needs a projection line and "
                                  "an offset line")
    crs = RasterCrs.parse(lines[0])
    if crs.kind != "utm":
        raise ReconstructionError(f"geo offset projection must be a UTM zone, "
                                  f"got {lines[0]!r}")
    parts = lines[1].split()
    if len(parts) != 2:
        raise ReconstructionError(f"offset line must hold two reals, got {lines[1]!r}")
    try:
        off_x, off_y = float(parts[0]), float(parts[1])
    except ValueError:
        raise ReconstructionError(f"offset line must hold two reals, "
                                  f"got {lines[1]!r}") from None
    if not (math.isfinite(off_x) and math.isfinite(off_y)):
        raise ReconstructionError("offsets must be finite")
    return crs, off_x, off_y
