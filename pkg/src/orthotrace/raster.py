"""Single-band georeferenced grids: ESRI ASCII Grid I/O, bilinear sampling, cropping.

A grid is immutable after load and safe to sample from any number of threads.
Two failure modes are deliberately distinct: a query outside the grid raises
:class:`RasterBoundsError`, while a query touching nodata cells returns
``None``. Downstream projection code needs to tell "the ray left the field"
apart from "there is a hole in the surface model".
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geodesy import AffineGeotransform, pixel_to_world, world_to_pixel


class RasterError(ValueError):
    """Malformed raster file or inconsistent grid."""


class RasterBoundsError(LookupError):
    """World query outside the grid's sampled extent."""


@dataclass(frozen=True)
class RasterCrs:
    """Either a UTM zone ('utm', zone, 'N'/'S') or plain geographic WGS84."""

    kind: str                    # "utm" | "wgs84"
    zone: int | None = None
    hemisphere: str | None = None

    def __post_init__(self):
        if self.kind == "utm":
            if self.zone is None or not 1 <= self.zone <= 60:
                raise RasterError(f"bad UTM zone {self.zone}")
            if self.hemisphere not in ("N", "S"):
                raise RasterError(f"bad hemisphere {self.hemisphere!r}")
        elif self.kind != "wgs84":
            raise RasterError(f"unsupported CRS kind {self.kind!r}")

    @classmethod
    def parse(cls, line: str) -> "RasterCrs":
        words = line.strip().split()
        if len(words) == 1 and words[0].upper() == "WGS84":
            return cls("wgs84")
        # accept "UTM 15 N", "UTM 15N", "WGS84 UTM 15N"
        if words and words[0].upper() == "WGS84":
            words = words[1:]
        if len(words) >= 2 and words[0].upper() == "UTM":
            tail = "".join(words[1:]).upper()
            if tail and tail[-1] in "NS":
                zone_s, hemi = tail[:-1], tail[-1]
            else:
                zone_s, hemi = tail, "N"
            try:
                return cls("utm", int(zone_s), hemi)
            except ValueError:
                raise RasterError(f"cannot parse UTM zone from {line!r}") from None
        raise RasterError(f"unsupported CRS line {line!r}")

    def __str__(self) -> str:
        if self.kind == "wgs84":
            return "WGS84"
        return f"UTM {self.zone} {self.hemisphere}"


@dataclass(frozen=True)
class RasterGrid:
    """Row-major single-band grid with an affine geotransform.

    ``values[row, col]`` is the sample at the CENTER of that pixel; row 0 is
    the northernmost row for the usual negative ``pixel_h``.
    """

    width: int
    height: int
    gt: AffineGeotransform
    values: np.ndarray
    crs: RasterCrs | None = None
    nodata: float | None = None
    _zmax: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.height, self.width):
            raise RasterError(f"value grid {vals.shape} does not match "
                              f"{self.height}x{self.width}")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def valid_mask(self) -> np.ndarray:
        mask = np.isfinite(self.values)
        if self.nodata is not None:
            mask &= self.values != self.nodata
        return mask

    def zmax(self) -> float:
        """Max valid value; cached (grid is immutable)."""
        if not self._zmax:
            mask = self.valid_mask()
            self._zmax.append(float(self.values[mask].max()) if mask.any() else -math.inf)
        return self._zmax[0]

    def is_nodata(self, v: float) -> bool:
        return not math.isfinite(v) or (self.nodata is not None and v == self.nodata)

    def contains_world(self, x: float, y: float) -> bool:
        col, row = world_to_pixel(self.gt, x, y)
        return 0.0 <= col <= self.width - 1 and 0.0 <= row <= self.height - 1

    def crop(self, col0: int, row0: int, ncols: int, nrows: int) -> "RasterGrid":
        """Cell-aligned window; the sub-grid samples identically to the parent
        at any world position it covers."""
        col0 = max(0, col0)
        row0 = max(0, row0)
        col1 = min(self.width, col0 + ncols)
        row1 = min(self.height, row0 + nrows)
        if col1 <= col0 or row1 <= row0:
            raise RasterError("empty crop window")
        ox, oy = pixel_to_world(self.gt, col0, row0)
        gt = AffineGeotransform(ox, oy, self.gt.pixel_w, self.gt.pixel_h,
                                self.gt.rot_x, self.gt.rot_y)
        return RasterGrid(col1 - col0, row1 - row0, gt,
                          self.values[row0:row1, col0:col1],
                          crs=self.crs, nodata=self.nodata)


def sample_bilinear(g: RasterGrid, x: float, y: float) -> float | None:
    """Bilinear value at world (x, y); ``None`` if any contributing cell is nodata.

    Raises :class:`RasterBoundsError` when (x, y) falls outside the hull of
    cell centers.
    """
    col, row = world_to_pixel(g.gt, x, y)
    if not (0.0 <= col <= g.width - 1 and 0.0 <= row <= g.height - 1):
        raise RasterBoundsError(f"({x}, {y}) outside raster extent")
    c0 = min(int(math.floor(col)), g.width - 2) if g.width > 1 else 0
    r0 = min(int(math.floor(row)), g.height - 2) if g.height > 1 else 0
    c1 = min(c0 + 1, g.width - 1)
    r1 = min(r0 + 1, g.height - 1)
    fc = col - c0
    fr = row - r0
    if fc == 1.0:                # far-edge clamp: shift the stencil instead
        c0, fc = c1, 0.0
    if fr == 1.0:
        r0, fr = r1, 0.0
    # Zero-weight corners do not contribute, so a nodata cell that the query
    # merely touches (exact cell-center or cell-edge queries) cannot poison
    # the result; such cells are replaced by 0.0, which the zero weight then
    # annihilates even when nodata is NaN.
    vals = []
    for r, c, w in ((r0, c0, (1.0 - fc) * (1.0 - fr)),
                    (r0, c1, fc * (1.0 - fr)),
                    (r1, c0, (1.0 - fc) * fr),
                    (r1, c1, fc * fr)):
        v = g.values[r, c]
        if g.is_nodata(v):
            if w != 0.0:
                return None
            v = 0.0
        vals.append(float(v))
    v00, v01, v10, v11 = vals
    # Factored form is bit-exact at cell centers and on constant grids.
    top = v00 + fc * (v01 - v00)
    bot = v10 + fc * (v11 - v10)
    return top + fr * (bot - top)


def sample_nearest(g: RasterGrid, x: float, y: float) -> float | None:
    """Nearest-cell value; same bounds/nodata contract as :func:`sample_bilinear`."""
    col, row = world_to_pixel(g.gt, x, y)
    if not (0.0 <= col <= g.width - 1 and 0.0 <= row <= g.height - 1):
        raise RasterBoundsError(f"({x}, {y}) outside raster extent")
    v = g.values[int(round(row)), int(round(col))]
    return None if g.is_nodata(v) else float(v)


# ---------------------------------------------------------------------------
# ESRI ASCII Grid

_ASC_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")


def read_raster(path: str | Path) -> RasterGrid:
    """Read an ESRI ASCII Grid (.asc) or a minimal GeoTIFF (.tif/.tiff).

    A single-line sidecar ``<name>.prj`` (``UTM 15 N`` or ``WGS84``) supplies
    the CRS for ASCII grids.
    """
    path = Path(path)
    if path.suffix.lower() in (".tif", ".tiff"):
        return _read_geotiff(path)
    lines = path.read_text().splitlines()
    header: dict[str, float] = {}
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if len(parts) == 2 and parts[0].lower() in _ASC_KEYS + ("nodata_value",):
            header[parts[0].lower()] = float(parts[1])
            i += 1
        else:
            break
    for key in _ASC_KEYS:
        if key not in header:
            raise RasterError(f"ASCII grid header missing {key}")
    width = int(header["ncols"])
    height = int(header["nrows"])
    cell = header["cellsize"]
    if width <= 0 or height <= 0 or cell <= 0:
        raise RasterError("non-positive grid dimensions or cellsize")
    try:
        flat = np.array(" ".join(lines[i:]).split(), dtype=np.float64)
    except ValueError as exc:
        raise RasterError(f"bad cell value in {path.name}: {exc}") from None
    if flat.size != width * height:
        raise RasterError(f"expected {width * height} values, found {flat.size}")
    values = flat.reshape(height, width)
    # first data line is the northernmost row; convert corner-of-grid to
    # center-of-top-left-pixel origin
    gt = AffineGeotransform(
        origin_x=header["xllcorner"] + 0.5 * cell,
        origin_y=header["yllcorner"] + height * cell - 0.5 * cell,
        pixel_w=cell, pixel_h=-cell,
    )
    crs = None
    sidecar = path.with_suffix(".prj")
    if sidecar.exists():
        crs = RasterCrs.parse(sidecar.read_text())
    nodata = header.get("nodata_value")
    return RasterGrid(width, height, gt, values, crs=crs, nodata=nodata)


def write_raster(g: RasterGrid, path: str | Path) -> None:
    """Write an ESRI ASCII Grid plus CRS sidecar; inverse of :func:`read_raster`.

    Requires an axis-aligned square-cell grid (the only kind the format can
    express). Values use shortest round-trip float formatting, so a write ->
    read cycle is value-identical.
    """
    path = Path(path)
    if g.gt.rot_x != 0.0 or g.gt.rot_y != 0.0:
        raise RasterError("ASCII grid cannot express shear terms")
    if abs(g.gt.pixel_w + g.gt.pixel_h) > 1e-12 * abs(g.gt.pixel_w):
        raise RasterError("ASCII grid requires square cells (pixel_h = -pixel_w)")
    cell = g.gt.pixel_w
    out = [
        f"ncols {g.width}",
        f"nrows {g.height}",
        f"xllcorner {g.gt.origin_x - 0.5 * cell!r}",
        f"yllcorner {g.gt.origin_y - g.height * cell + 0.5 * cell!r}",
        f"cellsize {cell!r}",
    ]
    if g.nodata is not None:
        out.append(f"NODATA_value {g.nodata!r}")
    for row in g.values:
        out.append(" ".join(repr(float(v)) for v in row))
    path.write_text("\n".join(out) + "\n")
    if g.crs is not None:
        path.with_suffix(".prj").write_text(str(g.crs) + "\n")


# ---------------------------------------------------------------------------
# Minimal GeoTIFF reader: single band, uncompressed, strip-organized,
# float32/float64/uint16/int16/uint8. Enough for DSM/CHM/NDVI rasters from
# common photogrammetry producers; anything fancier should be converted.

_TIFF_TYPE_SIZES = {1: 1, 2: 1, 3: 2, 4: 4, 5: 8, 6: 1, 8: 2, 9: 4, 10: 8, 11: 4, 12: 8}


def _read_tag_values(data, endian, type_, count, value_bytes):
    size = _TIFF_TYPE_SIZES.get(type_)
    if size is None:
        return None
    total = size * count
    raw = value_bytes[:4] if total <= 4 else None
    if raw is None:
        off = struct.unpack(endian + "I", value_bytes)[0]
        raw = data[off:off + total]
    fmt = {1: "B", 3: "H", 4: "I", 11: "f", 12: "d", 2: "s"}.get(type_)
    if fmt == "s":
        return raw[:count]
    if fmt is None:
        return None
    return struct.unpack(endian + fmt * count, raw[:total])


def _read_geotiff(path: Path) -> RasterGrid:
    data = path.read_bytes()
    if data[:2] == b"II":
        endian = "<"
    elif data[:2] == b"MM":
        endian = ">"
    else:
        raise RasterError("not a TIFF file")
    magic, ifd_off = struct.unpack(endian + "HI", data[2:8])
    if magic != 42:
        raise RasterError("bad TIFF magic")
    n_entries = struct.unpack(endian + "H", data[ifd_off:ifd_off + 2])[0]
    tags = {}
    for k in range(n_entries):
        e = ifd_off + 2 + 12 * k
        tag, type_, count = struct.unpack(endian + "HHI", data[e:e + 8])
        tags[tag] = _read_tag_values(data, endian, type_, count, data[e + 8:e + 12])

    def one(tag, default=None):
        v = tags.get(tag)
        return default if v is None else v[0]

    width = one(256)
    height = one(257)
    if width is None or height is None:
        raise RasterError("TIFF missing dimensions")
    if one(259, 1) != 1:
        raise RasterError("compressed TIFF not supported")
    if one(277, 1) != 1:
        raise RasterError("multi-band TIFF not supported")
    bits = one(258, 8)
    sample_format = one(339, 1)
    dtype = {(32, 3): "f4", (64, 3): "f8", (16, 1): "u2", (16, 2): "i2",
             (8, 1): "u1"}.get((bits, sample_format))
    if dtype is None:
        raise RasterError(f"unsupported sample type ({bits} bits, format {sample_format})")
    offsets = tags.get(273)
    counts = tags.get(279)
    if offsets is None or counts is None:
        raise RasterError("TIFF missing strip layout")
    raw = b"".join(data[o:o + c] for o, c in zip(offsets, counts))
    values = np.frombuffer(raw, dtype=endian + dtype, count=width * height)
    values = values.astype(np.float64).reshape(height, width)

    scale = tags.get(33550)
    tiepoint = tags.get(33922)
    if scale is None or tiepoint is None:
        raise RasterError("GeoTIFF missing pixel scale / tiepoint")
    sx, sy = scale[0], scale[1]
    # tiepoint maps raster (i,j) to world (x,y); convention is the top-left
    # CORNER of pixel (i,j), so shift half a pixel to our center convention
    i, j, _, x, y = tiepoint[0], tiepoint[1], tiepoint[2], tiepoint[3], tiepoint[4]
    gt = AffineGeotransform(
        origin_x=x - i * sx + 0.5 * sx,
        origin_y=y + j * sy - 0.5 * sy,
        pixel_w=sx, pixel_h=-sy,
    )
    nodata = None
    gdal_nodata = tags.get(42113)
    if gdal_nodata:
        try:
            nodata = float(gdal_nodata.rstrip(b"\x00").strip())
        except ValueError:
            pass
    crs = None
    geokeys = tags.get(34735)
    if geokeys:
        for k in range(4, len(geokeys), 4):
            key_id, _, _, value = geokeys[k:k + 4]
            if key_id == 3072 and 32601 <= value <= 32760:  # ProjectedCSTypeGeoKey
                hemi = "N" if value < 32700 else "S"
                crs = RasterCrs("utm", value % 100, hemi)
            elif key_id == 2048 and value == 4326 and crs is None:
                crs = RasterCrs("wgs84")
    return RasterGrid(int(width), int(height), gt, values, crs=crs, nodata=nodata)
