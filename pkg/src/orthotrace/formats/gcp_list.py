"""The ground-control-point list exchanged with photogrammetry tools.

Plain text: first line names the projection (``WGS84 UTM 15N``), every other
line is ``geo_x geo_y geo_z pixel_col pixel_row image_name``. Pixel
coordinates follow the package-wide convention that (0, 0) is the center of
the top-left pixel.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..geodesy import UtmCoord
from ..raster import RasterCrs


class GcpListError(ValueError):
    """Malformed GCP list content."""


@dataclass(frozen=True)
class GcpEntry:
    world: UtmCoord
    elevation: float
    pixel_col: float
    pixel_row: float
    image_name: str

    def __post_init__(self):
        if " " in self.image_name or not self.image_name:
            raise GcpListError(f"image name {self.image_name!r} must be non-empty "
                               "and free of spaces")


def _fmt(v: float) -> str:
    """Shortest decimal with at least three places, exact on re-parse."""
    s = f"{v:.3f}"
    return s if float(s) == v else repr(v)


def write_gcp_list(entries: list[GcpEntry], proj_line: str, path: str | Path,
                   image_dims: dict[str, tuple[int, int]] | None = None) -> None:
    """Write entries under the projection named by ``proj_line``. When
    ``image_dims`` maps image names to (width, height), pixels are checked
    against them."""
    if not entries:
        raise GcpListError("refusing to write an empty GCP list")
    zones = {(e.world.zone, e.world.hemisphere) for e in entries}
    if len(zones) != 1:
        raise GcpListError(f"entries span multiple UTM zones: {sorted(zones)}")
    zone, hemi = next(iter(zones))
    crs = RasterCrs.parse(proj_line)
    if crs.kind != "utm" or (crs.zone, crs.hemisphere) != (zone, hemi):
        raise GcpListError(f"projection line {proj_line!r} does not match entry "
                           f"zone {zone}{hemi}")
    if image_dims is not None:
        for e in entries:
            if e.image_name not in image_dims:
                raise GcpListError(f"no dimensions known for {e.image_name!r}")
            w, h = image_dims[e.image_name]
            if not (0 <= e.pixel_col <= w - 1 and 0 <= e.pixel_row <= h - 1):
                raise GcpListError(
                    f"pixel ({e.pixel_col}, {e.pixel_row}) outside {w}x{h} image "
                    f"{e.image_name!r}")
    lines = [proj_line.strip()]
    for e in entries:
        lines.append(" ".join([_fmt(e.world.easting), _fmt(e.world.northing),
                               _fmt(e.elevation), _fmt(e.pixel_col),
                               _fmt(e.pixel_row), e.image_name]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_gcp_list(path: str | Path) -> tuple[RasterCrs, list[GcpEntry]]:
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines:
        raise GcpListError("empty GCP list file")
    crs = RasterCrs.parse(lines[0])
    if crs.kind != "utm":
        raise GcpListError(f"GCP list projection must be a UTM zone, got {lines[0]!r}")
    entries = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 6:
            raise GcpListError(f"line {i}: expected 6 fields, got {len(parts)}")
        try:
            geo_x, geo_y, geo_z, px, py = (float(p) for p in parts[:5])
        except ValueError:
            raise GcpListError(f"line {i}: non-numeric coordinate") from None
        entries.append(GcpEntry(world=UtmCoord(geo_x, geo_y, crs.zone, crs.hemisphere),
                                elevation=geo_z, pixel_col=px, pixel_row=py,
                                image_name=parts[5]))
    return crs, entries
