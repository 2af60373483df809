"""EXIF access for JPEG frames: read capture time + GPS, write a GPS block.

Only the APP1/TIFF structures actually needed are implemented:

* reading walks IFD0, the camera sub-IFD (tag 0x8769) for DateTimeOriginal,
  and the GPS sub-IFD (tag 0x8825);
* writing never rewrites existing TIFF data.  The root IFD is copied to the
  end of the TIFF block with a GPS-pointer entry spliced in, the new GPS IFD
  is appended after it, and the header's first-IFD offset is patched.  Every
  byte of the file outside the APP1 segment is left untouched, and original
  value offsets stay valid because nothing moves.

Latitude/longitude are stored as degree/minute/second rationals with a
1/10000-second denominator (about 3 mm on the ground), altitude with a
millimeter denominator.
"""

from __future__ import annotations

import calendar
import os
import struct
import time
from dataclasses import dataclass
from pathlib import Path

from ..geodesy import GeoPoint

_SOI = b"\xff\xd8"
_EXIF_HEADER = b"Exif\x00\x00"

_TAG_DATETIME = 0x0132
_TAG_EXIF_IFD = 0x8769
_TAG_GPS_IFD = 0x8825
_TAG_DATETIME_ORIGINAL = 0x9003

_GPS_VERSION = 0x0000
_GPS_LAT_REF = 0x0001
_GPS_LAT = 0x0002
_GPS_LON_REF = 0x0003
_GPS_LON = 0x0004
_GPS_ALT_REF = 0x0005
_GPS_ALT = 0x0006

_TYPE_SIZES = {1: 1, 2: 1, 3: 2, 4: 4, 5: 8, 7: 1, 9: 4, 10: 8}
_SEC_DEN = 10_000
_ALT_DEN = 1_000


class ExifError(ValueError):
    """File is not a JPEG, lacks EXIF, or its IFD structure is broken."""


@dataclass(frozen=True)
class ExifGpsRecord:
    image_path: str
    timestamp: float              # UTC seconds from DateTimeOriginal
    gps: GeoPoint | None


# ---------------------------------------------------------------------------
# TIFF block parsing


class _Tiff:
    def __init__(self, block: bytes):
        if len(block) < 8:
            raise ExifError("TIFF block truncated")
        if block[:2] == b"II":
            self.end = "<"
        elif block[:2] == b"MM":
            self.end = ">"
        else:
            raise ExifError(f"bad TIFF byte-order mark {block[:2]!r}")
        if self._u16(block, 2) != 42:
            raise ExifError("bad TIFF magic")
        self.block = block
        self.ifd0_offset = self._u32(block, 4)

    def _u16(self, b: bytes, off: int) -> int:
        return struct.unpack_from(self.end + "H", b, off)[0]

    def _u32(self, b: bytes, off: int) -> int:
        return struct.unpack_from(self.end + "I", b, off)[0]

    def read_ifd(self, offset: int) -> tuple[list[tuple[int, int, int, bytes]], int]:
        """Entries as (tag, type, count, raw 4 value bytes), plus next-IFD offset."""
        b = self.block
        if offset + 2 > len(b):
            raise ExifError(f"IFD offset {offset} beyond TIFF block")
        n = self._u16(b, offset)
        end = offset + 2 + 12 * n + 4
        if end > len(b):
            raise ExifError(f"IFD at {offset} runs past end of TIFF block")
        entries = []
        for i in range(n):
            base = offset + 2 + 12 * i
            tag = self._u16(b, base)
            typ = self._u16(b, base + 2)
            count = self._u32(b, base + 4)
            entries.append((tag, typ, count, b[base + 8:base + 12]))
        return entries, self._u32(b, end - 4)

    def value(self, typ: int, count: int, raw: bytes):
        """Decode an entry's value, following the offset when it spills."""
        if typ not in _TYPE_SIZES:
            raise ExifError(f"unsupported TIFF type {typ}")
        nbytes = _TYPE_SIZES[typ] * count
        if nbytes <= 4:
            data = raw[:nbytes]
        else:
            off = struct.unpack(self.end + "I", raw)[0]
            if off + nbytes > len(self.block):
                raise ExifError(f"value offset {off} beyond TIFF block")
            data = self.block[off:off + nbytes]
        if typ == 2:
            return data.rstrip(b"\x00").decode("ascii", errors="replace")
        if typ in (1, 7):
            return data
        if typ == 3:
            return struct.unpack(self.end + f"{count}H", data)
        if typ == 4:
            return struct.unpack(self.end + f"{count}I", data)
        if typ == 5:
            vals = struct.unpack(self.end + f"{2 * count}I", data)
            return tuple((vals[2 * i], vals[2 * i + 1]) for i in range(count))
        if typ == 9:
            return struct.unpack(self.end + f"{count}i", data)
        vals = struct.unpack(self.end + f"{2 * count}i", data)
        return tuple((vals[2 * i], vals[2 * i + 1]) for i in range(count))

    def find(self, entries, tag: int):
        for t, typ, count, raw in entries:
            if t == tag:
                return self.value(typ, count, raw)
        return None


# ---------------------------------------------------------------------------
# JPEG segment handling


def _find_app1_exif(data: bytes) -> tuple[int, int] | None:
    """Locate the EXIF APP1 segment; returns (segment_start, segment_total_len)."""
    if data[:2] != _SOI:
        raise ExifError("not a JPEG (missing SOI)")
    i = 2
    while i + 4 <= len(data):
        if data[i] != 0xFF:
            raise ExifError(f"bad JPEG marker byte at offset {i}")
        marker = data[i + 1]
        if marker == 0xD8 or 0xD0 <= marker <= 0xD7 or marker == 0x01:
            i += 2
            continue
        if marker in (0xDA, 0xD9):    # start of scan / EOI: EXIF must precede
            return None
        seg_len = struct.unpack_from(">H", data, i + 2)[0]
        if seg_len < 2 or i + 2 + seg_len > len(data):
            raise ExifError(f"JPEG segment at {i} overruns file")
        if marker == 0xE1 and data[i + 4:i + 10] == _EXIF_HEADER:
            return i, 2 + seg_len
        i += 2 + seg_len
    return None


def _dms_to_degrees(dms, ref: str, neg_ref: str) -> float:
    if len(dms) != 3:
        raise ExifError(f"expected 3 DMS rationals, got {len(dms)}")
    parts = []
    for num, den in dms:
        if den == 0:
            raise ExifError("zero denominator in GPS rational")
        parts.append(num / den)
    deg = parts[0] + parts[1] / 60.0 + parts[2] / 3600.0
    return -deg if ref.upper() == neg_ref else deg


def _gps_from_ifd(tiff: _Tiff, gps_offset: int) -> GeoPoint | None:
    entries, _ = tiff.read_ifd(gps_offset)
    lat_ref = tiff.find(entries, _GPS_LAT_REF)
    lat = tiff.find(entries, _GPS_LAT)
    lon_ref = tiff.find(entries, _GPS_LON_REF)
    lon = tiff.find(entries, _GPS_LON)
    if lat is None or lon is None or lat_ref is None or lon_ref is None:
        return None
    alt = None
    alt_rat = tiff.find(entries, _GPS_ALT)
    if alt_rat is not None:
        num, den = alt_rat[0]
        if den == 0:
            raise ExifError("zero denominator in GPS altitude")
        alt = num / den
        alt_ref = tiff.find(entries, _GPS_ALT_REF)
        if alt_ref and alt_ref[0] == 1:
            alt = -alt
    return GeoPoint(_dms_to_degrees(lat, lat_ref, "S"),
                    _dms_to_degrees(lon, lon_ref, "W"), alt)


def read_exif(path: str | Path) -> ExifGpsRecord:
    """Capture timestamp (required) and GPS position (optional) of a JPEG."""
    data = Path(path).read_bytes()
    loc = _find_app1_exif(data)
    if loc is None:
        raise ExifError(f"{path}: no EXIF APP1 segment")
    seg_start, seg_len = loc
    tiff = _Tiff(data[seg_start + 10:seg_start + seg_len])
    ifd0, _ = tiff.read_ifd(tiff.ifd0_offset)

    stamp = None
    exif_ptr = tiff.find(ifd0, _TAG_EXIF_IFD)
    if exif_ptr is not None:
        exif_entries, _ = tiff.read_ifd(exif_ptr[0])
        stamp = tiff.find(exif_entries, _TAG_DATETIME_ORIGINAL)
    if stamp is None:
        stamp = tiff.find(ifd0, _TAG_DATETIME_ORIGINAL) or tiff.find(ifd0, _TAG_DATETIME)
    if stamp is None:
        raise ExifError(f"{path}: no DateTimeOriginal tag")
    try:
        ts = calendar.timegm(time.strptime(stamp, "%Y:%m:%d %H:%M:%S"))
    except ValueError:
        raise ExifError(f"{path}: unparseable timestamp {stamp!r}") from None

    gps = None
    gps_ptr = tiff.find(ifd0, _TAG_GPS_IFD)
    if gps_ptr is not None:
        gps = _gps_from_ifd(tiff, gps_ptr[0])
    return ExifGpsRecord(image_path=str(path), timestamp=float(ts), gps=gps)


# ---------------------------------------------------------------------------
# GPS writing


def _to_dms_rationals(value_deg: float) -> list[tuple[int, int]]:
    v = abs(value_deg)
    d = int(v)
    rem = (v - d) * 60.0
    m = int(rem)
    s_num = round((rem - m) * 60.0 * _SEC_DEN)
    if s_num >= 60 * _SEC_DEN:           # rounding spilled into the next minute
        s_num -= 60 * _SEC_DEN
        m += 1
    if m >= 60:
        m -= 60
        d += 1
    return [(d, 1), (m, 1), (s_num, _SEC_DEN)]


def _decode_encoding(point: GeoPoint) -> GeoPoint:
    """The point as it will read back after rational quantization."""
    lat = _dms_to_degrees(_to_dms_rationals(point.lat), "S" if point.lat < 0 else "N", "S")
    lon = _dms_to_degrees(_to_dms_rationals(point.lon), "W" if point.lon < 0 else "E", "W")
    alt = None
    if point.alt is not None:
        alt = round(abs(point.alt) * _ALT_DEN) / _ALT_DEN
        if point.alt < 0:
            alt = -alt
    return GeoPoint(lat, lon, alt)


def _build_gps_ifd(end: str, base_offset: int, point: GeoPoint) -> bytes:
    """Serialize a GPS IFD assuming it starts at ``base_offset`` in the block."""
    entries: list[tuple[int, int, int, bytes]] = []
    deferred: list[bytes] = []

    def inline(tag, typ, count, payload: bytes):
        entries.append((tag, typ, count, payload.ljust(4, b"\x00")))

    def spilled(tag, typ, count, payload: bytes):
        entries.append((tag, typ, count, payload))
        deferred.append(payload)

    n_entries = 5 + (2 if point.alt is not None else 0)
    data_start = base_offset + 2 + 12 * n_entries + 4

    def rat_bytes(rats):
        return b"".join(struct.pack(end + "II", n, d) for n, d in rats)

    inline(_GPS_VERSION, 1, 4, bytes((2, 3, 0, 0)))
    inline(_GPS_LAT_REF, 2, 2, (b"S" if point.lat < 0 else b"N") + b"\x00")
    lat_payload = rat_bytes(_to_dms_rationals(point.lat))
    spilled(_GPS_LAT, 5, 3, lat_payload)
    inline(_GPS_LON_REF, 2, 2, (b"W" if point.lon < 0 else b"E") + b"\x00")
    lon_payload = rat_bytes(_to_dms_rationals(point.lon))
    spilled(_GPS_LON, 5, 3, lon_payload)
    if point.alt is not None:
        inline(_GPS_ALT_REF, 1, 1, bytes((1 if point.alt < 0 else 0,)))
        alt_payload = struct.pack(end + "II", round(abs(point.alt) * _ALT_DEN), _ALT_DEN)
        spilled(_GPS_ALT, 5, 1, alt_payload)

    out = struct.pack(end + "H", n_entries)
    cursor = data_start
    for tag, typ, count, payload in entries:
        if len(payload) <= 4:
            raw = payload.ljust(4, b"\x00")
        else:
            raw = struct.pack(end + "I", cursor)
            cursor += len(payload)
        out += struct.pack(end + "HHI", tag, typ, count) + raw
    out += struct.pack(end + "I", 0)     # no next IFD
    out += b"".join(deferred)
    return out


def _fresh_tiff_block(point: GeoPoint) -> bytes:
    end = "<"
    header = b"II" + struct.pack(end + "HI", 42, 8)
    # IFD0: single entry pointing at the GPS IFD, which directly follows.
    gps_off = 8 + 2 + 12 + 4
    ifd0 = struct.pack(end + "H", 1)
    ifd0 += struct.pack(end + "HHII", _TAG_GPS_IFD, 4, 1, gps_off)
    ifd0 += struct.pack(end + "I", 0)
    return header + ifd0 + _build_gps_ifd(end, gps_off, point)


def write_exif_gps(path: str | Path, point: GeoPoint) -> bool:
    """Store ``point`` in the file's GPS IFD.  Returns True when the file was
    modified; a file that already encodes the same position is left alone, so
    repeated calls are byte-stable."""
    path = Path(path)
    data = path.read_bytes()
    loc = _find_app1_exif(data)

    if loc is None:
        block = _fresh_tiff_block(point)
        segment = b"\xff\xe1" + struct.pack(">H", 2 + 6 + len(block)) \
            + _EXIF_HEADER + block
        new_data = data[:2] + segment + data[2:]
    else:
        seg_start, seg_len = loc
        block = bytearray(data[seg_start + 10:seg_start + seg_len])
        tiff = _Tiff(bytes(block))
        ifd0, next_ifd = tiff.read_ifd(tiff.ifd0_offset)

        gps_ptr = tiff.find(ifd0, _TAG_GPS_IFD)
        if gps_ptr is not None:
            existing = _gps_from_ifd(tiff, gps_ptr[0])
            if existing is not None and existing == _decode_encoding(point):
                return False

        if len(block) % 2:
            block += b"\x00"
        end = tiff.end
        new_ifd0_off = len(block)
        kept = [(t, ty, c, raw) for t, ty, c, raw in ifd0 if t != _TAG_GPS_IFD]
        n = len(kept) + 1
        gps_ifd_off = new_ifd0_off + 2 + 12 * n + 4

        with_gps = kept + [(_TAG_GPS_IFD, 4, 1, struct.pack(end + "I", gps_ifd_off))]
        with_gps.sort(key=lambda e: e[0])
        new_ifd0 = struct.pack(end + "H", n)
        for tag, typ, count, raw in with_gps:
            new_ifd0 += struct.pack(end + "HHI", tag, typ, count) + raw
        new_ifd0 += struct.pack(end + "I", next_ifd)

        block += new_ifd0 + _build_gps_ifd(end, gps_ifd_off, point)
        struct.pack_into(end + "I", block, 4, new_ifd0_off)

        if 2 + 6 + len(block) > 0xFFFF:
            raise ExifError(f"{path}: EXIF segment would exceed 64 KiB")
        segment = b"\xff\xe1" + struct.pack(">H", 2 + 6 + len(block)) \
            + _EXIF_HEADER + bytes(block)
        new_data = data[:seg_start] + segment + data[seg_start + seg_len:]

    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(new_data)
    os.replace(tmp, path)
    return True
