"""Mission preparation walkthrough: stamp GNSS positions into camera
frames, shortlist frames for ground-control marking, and pick the minimum
set of frames worth processing.

Everything here runs on synthetic data written into a temporary directory,
so the script is safe to run anywhere:

    python3 demos/01_mission_prep.py
"""

import csv
import math
import tempfile
from pathlib import Path

from PIL import Image

from orthotrace.coverage import (cluster_flight_lines, compute_footprints,
                                 coverage_report, select_minimum_cover)
from orthotrace.formats.exif import read_exif
from orthotrace.formats.reconstruction import CameraIntrinsics, ShotPose
from orthotrace.gcp_select import candidate_images, default_radius
from orthotrace.geodesy import UtmCoord, wgs84_to_utm
from orthotrace.gps_embed import (embed_all, load_gnss_log, match_nearest,
                                  scan_images)

root = Path(tempfile.mkdtemp(prefix="mission_"))
print(f"working under {root}\n")

# ---------------------------------------------------------------------------
# A drone flies two straight lines and triggers the camera every two
# seconds. The camera writes DateTimeOriginal; the autopilot logs positions
# at a slightly different cadence. First: give every frame its position.
# ---------------------------------------------------------------------------

frames = root / "frames"
frames.mkdir()
t0 = 1686755000.0
shot_names = []
for k in range(8):
    name = f"dji_{k:03d}.jpg"
    shot_names.append(name)
    im = Image.new("RGB", (96, 64), (88, 132, 54))
    exif = Image.Exif()
    exif[0x9003] = f"2023:06:14 15:{43 + k // 30:02d}:{(20 + 2 * k) % 60:02d}"
    im.save(frames / name, exif=exif.tobytes())

with open(root / "gnss.csv", "w", newline="") as f:
    w = csv.writer(f)
    w.writerow(["t", "easting", "northing", "zone", "hemisphere", "alt"])
    for k in range(16):
        t = t0 + k  # 1 Hz log vs 0.5 Hz shutter
        x = 500000.0 + 8.0 * min(k, 7)
        y = 4310000.0 + (12.0 if k > 7 else 0.0)
        w.writerow([f"{t:.1f}", f"{x:.3f}", f"{y:.3f}", 15, "N", 251.0])

records, scan_errors = scan_images(frames)
fixes = load_gnss_log(root / "gnss.csv")
# camera clocks drift: here the camera is 1686755000 - camera_epoch seconds
# off the GNSS clock, handled by the clock_offset knob
offset = t0 - records[0].timestamp
matches, unmatched = match_nearest(records, fixes, max_dt=1.0,
                                   clock_offset=offset)
report = embed_all(matches, unmatched)
print(f"embedded {report.embedded}/{len(records)} frames "
      f"(max |dt| {max(abs(m[2]) for m in matches):.2f}s, "
      f"{len(unmatched)} unmatched)")
sample = read_exif(frames / shot_names[3])
print(f"frame 3 now reads lat {sample.gps.lat:.6f} lon {sample.gps.lon:.6f}\n")

# ---------------------------------------------------------------------------
# Ground control: a surveyed marker is only worth hand-marking in frames
# whose camera stood close enough to see it. Rank the frames by distance.
# ---------------------------------------------------------------------------

marker = UtmCoord(500030.0, 4310002.0, 15, "N")
# re-scan so the freshly embedded coordinates are visible
records, _ = scan_images(frames)
positions = [(Path(r.image_path).name,
              None if r.gps is None else wgs84_to_utm(r.gps, forced_zone=15))
             for r in records]
radius = default_radius(flight_alt=30.0, width_px=96, height_px=64,
                        focal_norm=0.85)
ranked = candidate_images(marker, positions, radius=radius)
print(f"marker at E {marker.easting:.0f}: {len(ranked)} frames within "
      f"{radius:.1f} m")
for name, dist in ranked[:3]:
    print(f"  {name}  {dist:5.1f} m")
print()

# ---------------------------------------------------------------------------
# Minimum image selection: with 80% forward overlap most frames are
# redundant. Build ground footprints from the poses, cluster them into
# flight lines, and keep the smallest subset that still covers the field.
# ---------------------------------------------------------------------------

cam = CameraIntrinsics("cam", 96, 64, 0.85)
shots = []
for k in range(8):
    x = 8.0 * (k % 4 if k < 4 else 3 - k % 4)    # serpentine turnaround
    y = 0.0 if k < 4 else 12.0
    shots.append(ShotPose(shot_names[k], "cam", (math.pi, 0.0, 0.0),
                          (-x, y, 30.0)))
footprints = compute_footprints(shots, {"cam": cam}, ground_z=0.0)
footprints = cluster_flight_lines(footprints, line_gap=6.0)
aoi = [(-4.0, -6.0), (38.0, -6.0), (38.0, 18.0), (-4.0, 18.0)]
chosen, uncovered = select_minimum_cover(footprints, aoi)
print(f"selected {len(chosen)} of {len(shots)} frames, "
      f"uncovered fraction {uncovered:.4f}")
print("  kept:", ", ".join(sorted(f.image_name for f in chosen)))
detail = coverage_report(chosen, aoi)
print(f"  report: uncovered fraction {detail['uncovered_fraction']:.4f}, "
      f"{len(detail['gaps'])} gap(s)")
