"""Synchronize camera frames with a GNSS track and write positions into EXIF.

The GNSS log is a CSV with header ``t,easting,northing,zone,hemisphere,alt``
(UTC seconds + UTM position). Each image's DateTimeOriginal is matched to the
nearest fix by timestamp; images farther than ``max_dt`` seconds from any fix are
reported unmatched rather than force-matched. Matched UTM positions are
converted to geographic coordinates and embedded as EXIF GPS.
"""

from __future__ import annotations

import csv
import logging
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path

from .formats.exif import ExifError, ExifGpsRecord, read_exif, write_exif_gps
from .geodesy import GeoPoint, UtmCoord, utm_to_wgs84

log = logging.getLogger(__name__)


class GnssError(ValueError):
    """Malformed or unusable GNSS log."""


@dataclass(frozen=True)
class GnssFix:
    t: float
    pos: UtmCoord
    alt: float


@dataclass
class EmbedReport:
    embedded: int = 0
    unmatched: int = 0
    failed: int = 0
    unchanged: int = 0           # already carried the same coordinates
    failures: list[tuple[str, str]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"embedded": self.embedded, "unmatched": self.unmatched,
                "failed": self.failed, "unchanged": self.unchanged}


_REQUIRED_COLUMNS = ("t", "easting", "northing", "zone", "hemisphere", "alt")


def load_gnss_log(path: str | Path, disorder_tol: float = 0.0) -> list[GnssFix]:
    """Load and time-sort a GNSS CSV. Duplicate timestamps are an error, as is
    input disorder beyond ``disorder_tol`` seconds (receivers log in order; a
    badly shuffled file points at a corrupt export)."""
    fixes: list[GnssFix] = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or any(c not in reader.fieldnames
                                            for c in _REQUIRED_COLUMNS):
            raise GnssError(f"GNSS log must have columns {','.join(_REQUIRED_COLUMNS)}, "
                            f"got {reader.fieldnames}")
        for i, row in enumerate(reader, start=2):
            try:
                fixes.append(GnssFix(
                    t=float(row["t"]),
                    pos=UtmCoord(float(row["easting"]), float(row["northing"]),
                                 int(row["zone"]), row["hemisphere"].strip().upper()),
                    alt=float(row["alt"]),
                ))
            except (TypeError, ValueError) as exc:
                raise GnssError(f"line {i}: {exc}") from None
    if not fixes:
        raise GnssError("GNSS log holds no fixes")
    worst = 0.0
    for prev, cur in zip(fixes, fixes[1:]):
        worst = max(worst, prev.t - cur.t)
    if worst > disorder_tol:
        raise GnssError(f"GNSS log out of order by {worst} s "
                        f"(tolerance {disorder_tol} s)")
    fixes.sort(key=lambda x: x.t)
    for prev, cur in zip(fixes, fixes[1:]):
        if prev.t == cur.t:
            raise GnssError(f"duplicate GNSS timestamp {cur.t}")
    return fixes


def match_nearest(images: list[ExifGpsRecord], fixes: list[GnssFix],
                  max_dt: float = 1.0, clock_offset: float = 0.0) \
        -> tuple[list[tuple[ExifGpsRecord, GnssFix, float]], list[ExifGpsRecord]]:
    """Nearest-fix match per image via binary search; ties go to the earlier
    fix. Returns (matches as (image, fix, |dt|), unmatched images).
    ``clock_offset`` is added to image timestamps before matching."""
    if not fixes:
        raise GnssError("cannot match against an empty fix list")
    if max_dt <= 0:
        raise GnssError(f"max_dt must be positive, got {max_dt}")
    times = [f.t for f in fixes]
    matches = []
    unmatched = []
    for rec in images:
        t = rec.timestamp + clock_offset
        i = bisect_left(times, t)
        best = None
        for j in (i - 1, i):
            if 0 <= j < len(fixes):
                dt = abs(t - times[j])
                # strict < keeps the earlier fix on exact ties
                if best is None or dt < best[1]:
                    best = (fixes[j], dt)
        if best is not None and best[1] <= max_dt:
            matches.append((rec, best[0], best[1]))
        else:
            unmatched.append(rec)
    return matches, unmatched


def match_interpolated(images: list[ExifGpsRecord], fixes: list[GnssFix],
                       max_dt: float = 1.0, clock_offset: float = 0.0) \
        -> tuple[list[tuple[ExifGpsRecord, GnssFix, float]], list[ExifGpsRecord]]:
    """Like :func:`match_nearest`, but when an image timestamp falls between
    two fixes (each end within ``max_dt``), position and altitude are linearly
    interpolated. Outside the track the nearest-fix rule applies."""
    if not fixes:
        raise GnssError("cannot match against an empty fix list")
    times = [f.t for f in fixes]
    matches = []
    unmatched = []
    for rec in images:
        t = rec.timestamp + clock_offset
        i = bisect_left(times, t)
        if 0 < i < len(times) and times[i] != t:
            a, b = fixes[i - 1], fixes[i]
            dt = min(t - a.t, b.t - t)
            if dt <= max_dt and (a.pos.zone, a.pos.hemisphere) == \
                    (b.pos.zone, b.pos.hemisphere):
                w = (t - a.t) / (b.t - a.t)
                pos = UtmCoord(a.pos.easting + w * (b.pos.easting - a.pos.easting),
                               a.pos.northing + w * (b.pos.northing - a.pos.northing),
                               a.pos.zone, a.pos.hemisphere)
                matches.append((rec, GnssFix(t, pos, a.alt + w * (b.alt - a.alt)), dt))
                continue
        m, u = match_nearest([rec], fixes, max_dt=max_dt, clock_offset=clock_offset)
        matches.extend(m)
        unmatched.extend(u)
    return matches, unmatched


def embed_all(matches: list[tuple[ExifGpsRecord, GnssFix, float]],
              unmatched: list[ExifGpsRecord] | None = None) -> EmbedReport:
    """Write each matched position into its image. Per-image failures are
    collected, not raised, so one corrupt frame cannot abort a flight's batch.
    Re-running on already-embedded images changes no bytes."""
    report = EmbedReport(unmatched=len(unmatched or ()))
    for rec, fix, _dt in matches:
        try:
            p = utm_to_wgs84(fix.pos)
            changed = write_exif_gps(rec.image_path, GeoPoint(p.lat, p.lon, fix.alt))
            report.embedded += 1
            if not changed:
                report.unchanged += 1
        except (ExifError, OSError) as exc:
            report.failed += 1
            report.failures.append((rec.image_path, str(exc)))
            log.warning("embed failed for %s: %s", rec.image_path, exc)
    return report


def scan_images(image_dir: str | Path) -> tuple[list[ExifGpsRecord], list[tuple[str, str]]]:
    """Read EXIF from every JPEG under ``image_dir`` (sorted); returns
    (records, [(path, error)] for unreadable files)."""
    records = []
    errors = []
    paths = sorted(p for p in Path(image_dir).iterdir()
                   if p.suffix.lower() in (".jpg", ".jpeg"))
    for p in paths:
        try:
            records.append(read_exif(p))
        except ExifError as exc:
            errors.append((str(p), str(exc)))
    return records, errors
