"""Ground-control-point bookkeeping: shortlist the images likely to show each
GCP (by distance between the GCP and each image's embedded camera position)
and assemble a validated GCP list from confirmed pixel marks."""

from __future__ import annotations

import logging
import math
from pathlib import Path

from .formats.gcp_list import GcpEntry, GcpListError, write_gcp_list
from .geodesy import UtmCoord

log = logging.getLogger(__name__)

MIN_GCPS = 3                 # georeferencing needs three non-collinear points
MIN_IMAGES_PER_GCP = 2       # below this a GCP cannot be triangulated
RECOMMENDED_IMAGES_PER_GCP = 3


def candidate_images(gcp_world: UtmCoord,
                     image_positions: list[tuple[str, UtmCoord | None]],
                     radius: float) -> list[tuple[str, float]]:
    """Images whose camera position lies within ``radius`` meters of the GCP,
    sorted by ascending horizontal distance. Images without a position (or in
    a different UTM zone) are skipped with a warning."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    ranked = []
    for name, pos in image_positions:
        if pos is None:
            log.warning("image %s has no GPS position; skipped", name)
            continue
        if (pos.zone, pos.hemisphere) != (gcp_world.zone, gcp_world.hemisphere):
            log.warning("image %s is in UTM %d%s, GCP in %d%s; skipped", name,
                        pos.zone, pos.hemisphere, gcp_world.zone,
                        gcp_world.hemisphere)
            continue
        d = math.hypot(pos.easting - gcp_world.easting,
                       pos.northing - gcp_world.northing)
        if d <= radius:
            ranked.append((name, d))
    ranked.sort(key=lambda nd: (nd[1], nd[0]))
    return ranked


def default_radius(flight_alt: float, width_px: int, height_px: int,
                   focal_norm: float) -> float:
    """Half the nadir ground-footprint diagonal.

    With focal normalized by the max image dimension, the ground footprint at
    altitude ``a`` spans a*(w/max)/f by a*(h/max)/f meters, so
    radius = (a/f) * 0.5 * sqrt((w/max)^2 + (h/max)^2).
    """
    if flight_alt <= 0 or focal_norm <= 0 or width_px <= 0 or height_px <= 0:
        raise ValueError("altitude, focal, and sensor dimensions must be positive")
    m = max(width_px, height_px)
    return (flight_alt / focal_norm) * 0.5 * math.hypot(width_px / m, height_px / m)


def assemble_gcp_list(marks: list[GcpEntry], proj_line: str, path: str | Path,
                      image_dims: dict[str, tuple[int, int]] | None = None) -> None:
    """Validate confirmed marks and write them as a GCP list.

    Policy: at least three distinct GCPs, each marked in at least two images
    (hard error below that); fewer than three images per GCP draws a warning
    because extra sightings stabilize the adjustment.
    """
    groups: dict[tuple[float, float, float], set[str]] = {}
    for m in marks:
        key = (m.world.easting, m.world.northing, m.elevation)
        groups.setdefault(key, set()).add(m.image_name)
    if len(groups) < MIN_GCPS:
        raise GcpListError(f"need at least {MIN_GCPS} distinct GCPs, "
                           f"got {len(groups)}")
    for key, images in sorted(groups.items()):
        if len(images) < MIN_IMAGES_PER_GCP:
            raise GcpListError(f"GCP at {key[:2]} marked in only {len(images)} "
                               f"image(s); need at least {MIN_IMAGES_PER_GCP}")
        if len(images) < RECOMMENDED_IMAGES_PER_GCP:
            log.warning("GCP at %s marked in %d images; %d or more recommended",
                        key[:2], len(images), RECOMMENDED_IMAGES_PER_GCP)
    for m in marks:
        if m.pixel_col < 0 or m.pixel_row < 0:
            raise GcpListError(f"negative pixel ({m.pixel_col}, {m.pixel_row}) "
                               f"in {m.image_name!r}")
    write_gcp_list(marks, proj_line, path, image_dims=image_dims)
