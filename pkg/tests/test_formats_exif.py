"""EXIF GPS read/write on JPEG files.

The read-side oracle is a hand-assembled APP1 segment built here from the
TIFF/EXIF byte layout (big-endian, so it also exercises the non-native
branch): 38 deg 57' 0" N, 92 deg 19' 48" W, i.e. (38.95, -92.33). The
write side is cross-checked with Pillow's independent EXIF parser.
"""

import struct
from datetime import datetime, timezone

import pytest
from PIL import Image

from orthotrace.formats import ExifError, read_exif, write_exif_gps
from orthotrace.formats.exif import _find_app1_exif
from orthotrace.geodesy import GeoPoint

DATETIME = "2023:06:14 15:02:11"
EXPECTED_TS = datetime(2023, 6, 14, 15, 2, 11, tzinfo=timezone.utc).timestamp()


def _hand_tiff_block(with_gps=True, with_datetime=True) -> bytes:
    """Big-endian TIFF block laid out by hand; offsets computed in comments."""
    E = ">"

    def entry(tag, typ, count, value_bytes):
        return struct.pack(E + "HHI", tag, typ, count) + value_bytes

    # layout: header 0..8, IFD0 8..38 (2 entries), Exif IFD 38..56,
    # datetime string 56..76, GPS IFD 76..130 (4 entries), lat 130..154,
    # lon 154..178
    out = b"MM" + struct.pack(E + "HI", 42, 8)
    ifd0 = [entry(0x8769, 4, 1, struct.pack(E + "I", 38))]
    if with_gps:
        ifd0.append(entry(0x8825, 4, 1, struct.pack(E + "I", 76)))
    out += struct.pack(E + "H", len(ifd0)) + b"".join(ifd0) + struct.pack(E + "I", 0)
    out = out.ljust(38, b"\x00")

    if with_datetime:
        exif_ifd = struct.pack(E + "H", 1) \
            + entry(0x9003, 2, 20, struct.pack(E + "I", 56)) \
            + struct.pack(E + "I", 0)
    else:
        exif_ifd = struct.pack(E + "H", 0) + struct.pack(E + "I", 0)
        exif_ifd = exif_ifd.ljust(18, b"\x00")
    out += exif_ifd
    out += (DATETIME + "\x00").encode("ascii")
    assert len(out) == 76

    if with_gps:
        def rats(*pairs):
            return b"".join(struct.pack(E + "II", n, d) for n, d in pairs)

        gps = struct.pack(E + "H", 4)
        gps += entry(0x0001, 2, 2, b"N\x00\x00\x00")
        gps += entry(0x0002, 5, 3, struct.pack(E + "I", 130))
        gps += entry(0x0003, 2, 2, b"W\x00\x00\x00")
        gps += entry(0x0004, 5, 3, struct.pack(E + "I", 154))
        gps += struct.pack(E + "I", 0)
        out += gps
        assert len(out) == 130
        out += rats((38, 1), (57, 1), (0, 1))          # 38 deg 57' 0"
        out += rats((92, 1), (19, 1), (48, 1))         # 92 deg 19' 48"
    return out


def _jpeg_with_app1(tmp_path, name="img.jpg", **kwargs):
    p = tmp_path / name
    Image.new("RGB", (8, 6), (10, 120, 40)).save(p, "JPEG")
    data = p.read_bytes()
    block = _hand_tiff_block(**kwargs)
    seg = b"\xff\xe1" + struct.pack(">H", 2 + 6 + len(block)) + b"Exif\x00\x00" + block
    p.write_bytes(data[:2] + seg + data[2:])
    return p


def _plain_jpeg(tmp_path, name="plain.jpg"):
    p = tmp_path / name
    Image.new("RGB", (8, 6), (200, 30, 30)).save(p, "JPEG")
    return p


class TestRead:
    def test_hand_fixture(self, tmp_path):
        rec = read_exif(_jpeg_with_app1(tmp_path))
        assert rec.timestamp == EXPECTED_TS
        assert rec.gps is not None
        assert abs(rec.gps.lat - 38.95) < 1e-6
        assert abs(rec.gps.lon - (-92.33)) < 1e-6
        assert rec.gps.alt is None

    def test_no_gps_ifd(self, tmp_path):
        rec = read_exif(_jpeg_with_app1(tmp_path, with_gps=False))
        assert rec.gps is None
        assert rec.timestamp == EXPECTED_TS

    def test_missing_app1(self, tmp_path):
        with pytest.raises(ExifError, match="APP1"):
            read_exif(_plain_jpeg(tmp_path))

    def test_missing_datetime(self, tmp_path):
        with pytest.raises(ExifError, match="DateTimeOriginal"):
            read_exif(_jpeg_with_app1(tmp_path, with_datetime=False))

    def test_not_a_jpeg(self, tmp_path):
        p = tmp_path / "x.jpg"
        p.write_bytes(b"PNG nonsense")
        with pytest.raises(ExifError):
            read_exif(p)

    def test_malformed_ifd_offset(self, tmp_path):
        p = _jpeg_with_app1(tmp_path)
        data = bytearray(p.read_bytes())
        seg_start, _ = _find_app1_exif(bytes(data))
        # point IFD0 far beyond the APP1 payload
        struct.pack_into(">I", data, seg_start + 10 + 4, 0xFFFF)
        p.write_bytes(bytes(data))
        with pytest.raises(ExifError):
            read_exif(p)


class TestWrite:
    CASES = [
        GeoPoint(38.95, -92.33, 251.5),
        GeoPoint(0.0, 0.0),
        GeoPoint(-33.9, 179.999999, -12.25),
    ]

    @pytest.mark.parametrize("point", CASES, ids=["midwest", "origin", "antimeridian"])
    def test_round_trip(self, tmp_path, point):
        p = _jpeg_with_app1(tmp_path)
        assert write_exif_gps(p, point) is True
        rec = read_exif(p)
        assert abs(rec.gps.lat - point.lat) < 1e-7
        assert abs(rec.gps.lon - point.lon) < 1e-7
        if point.alt is None:
            assert rec.gps.alt is None
        else:
            assert abs(rec.gps.alt - point.alt) < 1e-3

    def test_second_write_is_byte_stable(self, tmp_path):
        p = _jpeg_with_app1(tmp_path)
        point = GeoPoint(38.951234, -92.334321, 250.0)
        assert write_exif_gps(p, point) is True
        first = p.read_bytes()
        assert write_exif_gps(p, point) is False
        assert p.read_bytes() == first

    def test_bytes_outside_app1_untouched(self, tmp_path):
        p = _jpeg_with_app1(tmp_path)
        before = p.read_bytes()
        s0, l0 = _find_app1_exif(before)
        write_exif_gps(p, GeoPoint(10.0, 20.0, 30.0))
        after = p.read_bytes()
        s1, l1 = _find_app1_exif(after)
        assert before[:s0] == after[:s1]
        assert before[s0 + l0:] == after[s1 + l1:]

    def test_replaces_existing_coordinates(self, tmp_path):
        p = _jpeg_with_app1(tmp_path)          # fixture carries 38.95/-92.33
        write_exif_gps(p, GeoPoint(40.0, -91.0))
        rec = read_exif(p)
        assert abs(rec.gps.lat - 40.0) < 1e-7
        assert abs(rec.gps.lon - (-91.0)) < 1e-7

    def test_insert_into_jpeg_without_exif(self, tmp_path):
        p = _plain_jpeg(tmp_path)
        original = p.read_bytes()
        write_exif_gps(p, GeoPoint(38.95, -92.33))
        after = p.read_bytes()
        s, ln = _find_app1_exif(after)
        assert s == 2
        assert after[:2] + after[s + ln:] == original
        # no DateTimeOriginal in the fresh block, so full read still errors
        with pytest.raises(ExifError, match="DateTimeOriginal"):
            read_exif(p)

    def test_non_jpeg_rejected(self, tmp_path):
        p = tmp_path / "x.bin"
        p.write_bytes(b"\x00" * 32)
        with pytest.raises(ExifError):
            write_exif_gps(p, GeoPoint(0.0, 0.0))


class TestPillowCrossCheck:
    """Pillow's EXIF parser as an independent read-back of our writer."""

    def _pil_gps(self, path):
        with Image.open(path) as im:
            return im.getexif().get_ifd(0x8825)

    def test_pillow_reads_what_we_wrote(self, tmp_path):
        p = _plain_jpeg(tmp_path)
        write_exif_gps(p, GeoPoint(38.95, -92.33, 251.5))
        gps = self._pil_gps(p)
        assert gps[1] == "N" and gps[3] == "W"
        lat = float(gps[2][0]) + float(gps[2][1]) / 60 + float(gps[2][2]) / 3600
        lon = float(gps[4][0]) + float(gps[4][1]) / 60 + float(gps[4][2]) / 3600
        assert abs(lat - 38.95) < 1e-7
        assert abs(lon - 92.33) < 1e-7
        assert gps[5] in (0, b"\x00")      # Pillow returns the raw BYTE
        assert abs(float(gps[6]) - 251.5) < 1e-3

    def test_rational_denominators_bounded(self, tmp_path):
        p = _plain_jpeg(tmp_path)
        write_exif_gps(p, GeoPoint(-0.123456789, 11.987654321))
        gps = self._pil_gps(p)
        for field in (2, 4):
            for r in gps[field]:
                assert r.denominator <= 10**7

    def test_pillow_reads_hand_fixture(self, tmp_path):
        gps = self._pil_gps(_jpeg_with_app1(tmp_path))
        assert gps[1] == "N"
        assert tuple(float(v) for v in gps[2]) == (38.0, 57.0, 0.0)
