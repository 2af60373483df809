"""Minimal ESRI shapefile writer for polygon exports.

Produces the four-file set (.shp geometry, .shx index, .dbf attributes,
.prj projection). Byte layout notes, since the format mixes endianness:

* main header: file code 9994 and file length are big-endian; version 1000,
  shape type, and the bounding box are little-endian
* record headers (record number, content length in 16-bit words) are
  big-endian; record contents are little-endian
* rings are closed and wound clockwise on output, per the polygon spec
* the .dbf last-update stamp is a fixed constant so identical inputs yield
  identical bytes
"""

from __future__ import annotations

import struct
from pathlib import Path

from ..raster import RasterCrs

_SHAPE_POLYGON = 5
_DBF_DATE = (26, 1, 1)           # fixed YY MM DD for reproducible output
_FLOAT_WIDTH, _FLOAT_DECIMALS = 19, 6
_ID_WIDTH = 9


class ShapefileError(ValueError):
    """Geometry or attributes that cannot be written."""


def _close_ring(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise ShapefileError(f"polygon needs at least 3 vertices, got {len(pts)}")
    if pts[0] != pts[-1]:
        pts.append(pts[0])
    if len(set(pts[:-1])) != len(pts) - 1:
        raise ShapefileError("polygon has repeated vertices")
    return pts


def _signed_area(ring: list[tuple[float, float]]) -> float:
    s = 0.0
    for (x1, y1), (x2, y2) in zip(ring[:-1], ring[1:]):
        s += x1 * y2 - x2 * y1
    return 0.5 * s


def _segments_cross(p, q, r, s) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if v == 0 else (1 if v > 0 else -1)

    o1, o2 = orient(p, q, r), orient(p, q, s)
    o3, o4 = orient(r, s, p), orient(r, s, q)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def _check_simple(ring: list[tuple[float, float]]) -> None:
    segs = list(zip(ring[:-1], ring[1:]))
    n = len(segs)
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:        # first and last share the start vertex
                continue
            if _segments_cross(*segs[i], *segs[j]):
                raise ShapefileError("polygon ring is self-intersecting")


def _prepare_ring(points) -> list[tuple[float, float]]:
    ring = _close_ring(points)
    _check_simple(ring)
    area = _signed_area(ring)
    if area == 0:
        raise ShapefileError("polygon is degenerate (zero area)")
    if area > 0:                  # shoelace positive = counterclockwise
        ring.reverse()
    return ring


def _utm_wkt(crs: RasterCrs) -> str:
    meridian = crs.zone * 6 - 183
    fn = 10000000.0 if crs.hemisphere == "S" else 0.0
    name = f"WGS_1984_UTM_Zone_{crs.zone}{crs.hemisphere}"
    return (
        f'PROJCS["{name}",GEOGCS["GCS_WGS_1984",DATUM["D_WGS_1984",'
        'SPHEROID["WGS_1984",6378137.0,298.257223563]],PRIMEM["Greenwich",0.0],'
        'UNIT["Degree",0.0174532925199433]],PROJECTION["Transverse_Mercator"],'
        'PARAMETER["False_Easting",500000.0],'
        f'PARAMETER["False_Northing",{fn:.1f}],'
        f'PARAMETER["Central_Meridian",{float(meridian):.1f}],'
        'PARAMETER["Scale_Factor",0.9996],PARAMETER["Latitude_Of_Origin",0.0],'
        'UNIT["Meter",1.0]]'
    )


def _main_header(file_len_words: int, bbox: tuple[float, float, float, float]) -> bytes:
    out = struct.pack(">6i", 9994, 0, 0, 0, 0, 0)     # file code + 5 unused
    out += struct.pack(">i", file_len_words)
    out += struct.pack("<2i", 1000, _SHAPE_POLYGON)
    out += struct.pack("<4d", *bbox)
    out += struct.pack("<4d", 0.0, 0.0, 0.0, 0.0)
    return out


def _polygon_record(ring: list[tuple[float, float]]) -> bytes:
    xs = [p[0] for p in ring]
    ys = [p[1] for p in ring]
    out = struct.pack("<i", _SHAPE_POLYGON)
    out += struct.pack("<4d", min(xs), min(ys), max(xs), max(ys))
    out += struct.pack("<2i", 1, len(ring))
    out += struct.pack("<i", 0)
    for x, y in ring:
        out += struct.pack("<2d", x, y)
    return out


def _dbf_bytes(ids: list[int], fields: dict[str, list[float]]) -> bytes:
    names = ["id"] + list(fields)
    for name in names:
        if len(name.encode("ascii")) > 10:
            raise ShapefileError(f"attribute name {name!r} longer than 10 chars")
    widths = [_ID_WIDTH] + [_FLOAT_WIDTH] * len(fields)
    decimals = [0] + [_FLOAT_DECIMALS] * len(fields)

    record_len = 1 + sum(widths)
    header_len = 32 + 32 * len(names) + 1
    out = struct.pack("<4B", 0x03, *_DBF_DATE)
    out += struct.pack("<I", len(ids))
    out += struct.pack("<2H", header_len, record_len)
    out += b"\x00" * 20
    for name, width, dec in zip(names, widths, decimals):
        out += name.encode("ascii").ljust(11, b"\x00")
        out += b"N" + b"\x00" * 4 + bytes((width, dec)) + b"\x00" * 14
    out += b"\x0d"

    columns = [[f"{i:>{_ID_WIDTH}d}" for i in ids]]
    for name, width, dec in zip(names[1:], widths[1:], decimals[1:]):
        vals = fields[name]
        if len(vals) != len(ids):
            raise ShapefileError(f"field {name!r}: {len(vals)} values for "
                                 f"{len(ids)} records")
        col = []
        for v in vals:
            s = f"{float(v):>{width}.{dec}f}"
            if len(s) > width:
                raise ShapefileError(f"field {name!r}: value {v!r} overflows "
                                     f"width {width}")
            col.append(s)
        columns.append(col)
    for rec in range(len(ids)):
        out += b" " + "".join(col[rec] for col in columns).encode("ascii")
    out += b"\x1a"
    return out


def write_shapefile(polygons: list[list[tuple[float, float]]], ids: list[int],
                    crs: RasterCrs, base_path: str | Path,
                    fields: dict[str, list[float]] | None = None) -> None:
    """Write ``polygons`` with integer ``ids`` (plus optional numeric
    attribute columns) to ``base_path``.shp/.shx/.dbf/.prj."""
    if len(polygons) != len(ids):
        raise ShapefileError(f"{len(polygons)} polygons but {len(ids)} ids")
    if len(set(ids)) != len(ids):
        raise ShapefileError("ids must be unique")
    if not polygons:
        raise ShapefileError("refusing to write an empty shapefile")
    if crs.kind != "utm":
        raise ShapefileError("shapefile export requires a UTM grid")
    fields = fields or {}

    rings = [_prepare_ring(p) for p in polygons]
    xs = [x for r in rings for x, _ in r]
    ys = [y for r in rings for _, y in r]
    bbox = (min(xs), min(ys), max(xs), max(ys))

    records = [_polygon_record(r) for r in rings]
    shp_body = b""
    shx_body = b""
    offset_words = 50                      # main header = 100 bytes
    for num, content in enumerate(records, start=1):
        words = len(content) // 2
        shp_body += struct.pack(">2i", num, words) + content
        shx_body += struct.pack(">2i", offset_words, words)
        offset_words += 4 + words

    base = Path(base_path)
    base = base.with_suffix("") if base.suffix == ".shp" else base
    shp = _main_header(50 + len(shp_body) // 2, bbox) + shp_body
    shx = _main_header(50 + len(shx_body) // 2, bbox) + shx_body
    base.with_suffix(".shp").write_bytes(shp)
    base.with_suffix(".shx").write_bytes(shx)
    base.with_suffix(".dbf").write_bytes(_dbf_bytes(list(ids), fields))
    base.with_suffix(".prj").write_text(_utm_wkt(crs) + "\n")
