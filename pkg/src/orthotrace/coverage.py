"""Pick the fewest survey images that still cover the area of interest.

Footprints are the ground quadrilaterals seen by each image (corner rays cast
onto the DSM, or a constant-height plane when no DSM is available). Camera
ground centers are split into flight lines by clustering their coordinate on
the across-track axis (the minor principal axis of the center cloud). The
cover itself is greedy farthest-reach interval covering, applied twice: once
over lines on the across axis, then along each retained line - optimal for
1-D covers and near-optimal for serpentine missions. A rasterized check of
the leftover area re-adds skipped images next to gaps until the uncovered
fraction drops under the cap; if it cannot, a best-effort warning is logged
and the result returned as-is.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .formats.reconstruction import CameraIntrinsics, ShotPose
from .geometry import points_in_polygon, polygon_area
from .projector import (STATUS_OK, intersect_ray_dsm, pixel_to_ray)
from .raster import RasterGrid

log = logging.getLogger(__name__)

__all__ = ["CoverageError", "Footprint", "compute_footprints",
           "cluster_flight_lines", "select_minimum_cover", "coverage_report",
           "polygon_area", "default_aoi"]


class CoverageError(ValueError):
    """Unusable footprints, thresholds, or area of interest."""


@dataclass(frozen=True)
class Footprint:
    image_name: str
    polygon: tuple[tuple[float, float], ...]
    partial: bool = False                       # at least one corner missed
    line_id: int | None = None
    along: float | None = None                  # center on the flight axis
    along_span: tuple[float, float] | None = None
    across_span: tuple[float, float] | None = None

    def __post_init__(self):
        if len(self.polygon) < 3:
            raise CoverageError(f"footprint {self.image_name!r} has "
                                f"{len(self.polygon)} corners; need >= 3")
        if polygon_area(self.polygon) <= 0.0:
            raise CoverageError(f"degenerate footprint for {self.image_name!r}")

    def center(self) -> tuple[float, float]:
        xs = [p[0] for p in self.polygon]
        ys = [p[1] for p in self.polygon]
        return (sum(xs) / len(xs), sum(ys) / len(ys))


def compute_footprints(shots: list[ShotPose],
                       cameras: dict[str, CameraIntrinsics],
                       dsm: RasterGrid | None = None,
                       ground_z: float | None = None,
                       offset: tuple[float, float] = (0.0, 0.0), *,
                       step: float | None = None,
                       tol: float = 1e-3) -> list[Footprint]:
    """Ground quadrilateral of each image (full pixel extent corners).

    Corners that fail to reach the ground are dropped; a footprint shrinks to
    the remaining corners and is flagged partial. Fewer than three landed
    corners is an error - such an image cannot bound any area.
    """
    if dsm is None and ground_z is None:
        raise CoverageError("need a DSM or a ground plane height")
    out = []
    for shot in shots:
        cam = cameras.get(shot.camera_key)
        if cam is None:
            raise CoverageError(f"shot {shot.image_name!r} references unknown "
                                f"camera {shot.camera_key!r}")
        corners = [(-0.5, -0.5), (cam.width - 0.5, -0.5),
                   (cam.width - 0.5, cam.height - 0.5),
                   (-0.5, cam.height - 0.5)]
        pts = []
        missed = 0
        for px in corners:
            ray = pixel_to_ray(cam, shot, px, offset)
            if dsm is not None:
                point, status = intersect_ray_dsm(ray, dsm, step=step, tol=tol)
                if status != STATUS_OK:
                    missed += 1
                    continue
                pts.append((point[0], point[1]))
            else:
                if ray.dir[2] >= 0.0 or ray.origin[2] <= ground_z:
                    missed += 1
                    continue
                t = (ray.origin[2] - ground_z) / -ray.dir[2]
                x, y, _ = ray.at(t)
                pts.append((x, y))
        if len(pts) < 3:
            raise CoverageError(f"only {len(pts)} of 4 corners of "
                                f"{shot.image_name!r} reach the ground")
        out.append(Footprint(shot.image_name, tuple(pts), partial=missed > 0))
    return out


def _flight_axes(centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(flight direction, across-track direction) from the center cloud's
    principal axes, with a canonical sign so input order cannot flip them."""
    if len(centers) < 2:
        flight = np.array([1.0, 0.0])
    else:
        x = centers - centers.mean(axis=0)
        _, vecs = np.linalg.eigh(x.T @ x)
        flight = vecs[:, -1]
        if flight[0] < 0 or (flight[0] == 0 and flight[1] < 0):
            flight = -flight
    return flight, np.array([-flight[1], flight[0]])


def cluster_flight_lines(footprints: list[Footprint],
                         line_gap: float) -> list[Footprint]:
    """Assign line ids and along-track positions.

    Across-track center coordinates more than ``line_gap`` apart fall into
    different lines; ids are numbered by ascending across position. The
    result is independent of input order.
    """
    if not footprints:
        raise CoverageError("no footprints to cluster")
    if line_gap <= 0:
        raise CoverageError(f"line_gap must be positive, got {line_gap}")
    fps = sorted(footprints, key=lambda f: f.image_name)
    centers = np.array([f.center() for f in fps])
    flight, across = _flight_axes(centers)
    acrosses = centers @ across
    alongs = centers @ flight

    order = sorted(range(len(fps)), key=lambda i: (acrosses[i], fps[i].image_name))
    line_of = {}
    line = 0
    prev = None
    for i in order:
        if prev is not None and acrosses[i] - prev > line_gap:
            line += 1
        line_of[i] = line
        prev = acrosses[i]

    out = []
    for i, f in enumerate(fps):
        poly = np.array(f.polygon)
        a = poly @ flight
        c = poly @ across
        out.append(replace(f, line_id=line_of[i], along=float(alongs[i]),
                           along_span=(float(a.min()), float(a.max())),
                           across_span=(float(c.min()), float(c.max()))))
    out.sort(key=lambda f: (f.line_id, f.along, f.image_name))
    return out


def _greedy_interval_cover(items: list[tuple[float, float, int]],
                           min_overlap: float) -> list[int]:
    """Farthest-reach cover of [min lo, max hi]. A follow-up interval
    qualifies while its overlap with the covered prefix is at least
    min_overlap of its own extent. Returns chosen indices, in cover order."""
    span_lo = min(lo for lo, _, _ in items)
    span_hi = max(hi for _, hi, _ in items)
    eps = 1e-9 * max(1.0, abs(span_hi - span_lo))
    chosen = []
    taken = set()
    first = [it for it in items if it[0] <= span_lo + eps]
    best = max(first, key=lambda it: (it[1], -it[0], -it[2]))
    chosen.append(best[2])
    taken.add(best[2])
    covered = best[1]
    while covered < span_hi - eps:
        cands = [it for it in items if it[2] not in taken
                 and it[1] > covered + eps
                 and it[0] <= covered - min_overlap * (it[1] - it[0]) + eps]
        if not cands:
            break
        best = max(cands, key=lambda it: (it[1], -it[0], -it[2]))
        chosen.append(best[2])
        taken.add(best[2])
        covered = best[1]
    return chosen


def _median(vals):
    s = sorted(vals)
    n = len(s)
    return s[n // 2] if n % 2 else (s[n // 2 - 1] + s[n // 2]) / 2.0


def _footprint_short_side(f: Footprint) -> float:
    xs = [p[0] for p in f.polygon]
    ys = [p[1] for p in f.polygon]
    return min(max(xs) - min(xs), max(ys) - min(ys))


def default_aoi(footprints: list[Footprint]) -> list[tuple[float, float]]:
    """Bounding box of all footprints, inset on each side by half the median
    footprint short side - a cheap erosion that trims the half-covered rim."""
    xs = [p[0] for f in footprints for p in f.polygon]
    ys = [p[1] for f in footprints for p in f.polygon]
    inset = _median([_footprint_short_side(f) for f in footprints]) / 2.0
    x0, x1 = min(xs) + inset, max(xs) - inset
    y0, y1 = min(ys) + inset, max(ys) - inset
    if x1 <= x0 or y1 <= y0:        # erosion swallowed the mission; keep bbox
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]


def _coverage_grid(aoi, footprints, selected_idx, cell):
    xs_poly = [p[0] for p in aoi]
    ys_poly = [p[1] for p in aoi]
    x0, x1 = min(xs_poly), max(xs_poly)
    y0, y1 = min(ys_poly), max(ys_poly)
    ncols = max(1, math.ceil((x1 - x0) / cell))
    nrows = max(1, math.ceil((y1 - y0) / cell))
    cx = x0 + cell * (np.arange(ncols) + 0.5)
    cy = y0 + cell * (np.arange(nrows) + 0.5)
    gx, gy = np.meshgrid(cx, cy)
    in_aoi = points_in_polygon(gx, gy, aoi)
    covered = np.zeros_like(in_aoi)
    for i in selected_idx:
        covered |= points_in_polygon(gx, gy, footprints[i].polygon)
    return in_aoi, covered, (x0, y0, ncols, nrows)


def _uncovered_fraction(in_aoi, covered) -> float:
    total = int(in_aoi.sum())
    if total == 0:
        raise CoverageError("area of interest contains no grid cells")
    return float((in_aoi & ~covered).sum()) / total


def select_minimum_cover(footprints: list[Footprint],
                         aoi: list[tuple[float, float]] | None = None, *,
                         min_h_overlap: float = 0.10,
                         min_v_overlap: float = 0.10,
                         max_uncovered: float = 0.01,
                         cell: float | None = None) \
        -> tuple[list[Footprint], float]:
    """Greedy minimum subset of clustered footprints covering the AOI.

    Lines are thinned on the across axis at ``min_v_overlap``, each retained
    line covered along-track at ``min_h_overlap``, then the leftover area is
    rasterized and skipped images re-added next to any remaining gaps.
    """
    if not footprints:
        raise CoverageError("no footprints to select from")
    for name, v in (("min_h_overlap", min_h_overlap),
                    ("min_v_overlap", min_v_overlap),
                    ("max_uncovered", max_uncovered)):
        if not 0.0 <= v < 1.0:
            raise CoverageError(f"{name} must be in [0, 1), got {v}")
    if any(f.line_id is None or f.along_span is None for f in footprints):
        raise CoverageError("footprints must go through cluster_flight_lines "
                            "before selection")
    fps = sorted(footprints, key=lambda f: (f.line_id, f.along, f.image_name))
    if aoi is None:
        aoi = default_aoi(fps)
    elif len(aoi) < 3:
        raise CoverageError("area of interest needs at least 3 vertices")

    ax0 = min(p[0] for p in aoi)
    ax1 = max(p[0] for p in aoi)
    ay0 = min(p[1] for p in aoi)
    ay1 = max(p[1] for p in aoi)
    if not any(min(p[0] for p in f.polygon) <= ax1
               and max(p[0] for p in f.polygon) >= ax0
               and min(p[1] for p in f.polygon) <= ay1
               and max(p[1] for p in f.polygon) >= ay0 for f in fps):
        raise CoverageError("area of interest is disjoint from every footprint")

    lines: dict[int, list[int]] = {}
    for i, f in enumerate(fps):
        lines.setdefault(f.line_id, []).append(i)
    line_ids = sorted(lines)
    line_spans = []
    for lid in line_ids:
        spans = [fps[i].across_span for i in lines[lid]]
        line_spans.append((min(s[0] for s in spans),
                           max(s[1] for s in spans), lid))
    kept_lines = _greedy_interval_cover(line_spans, min_v_overlap) \
        if len(line_ids) > 1 else [line_ids[0]]

    selected: set[int] = set()
    for lid in kept_lines:
        members = lines[lid]
        items = [(fps[i].along_span[0], fps[i].along_span[1], i)
                 for i in members]
        selected.update(_greedy_interval_cover(items, min_h_overlap))

    if cell is None:
        cell = _median([_footprint_short_side(f) for f in fps]) / 20.0
    in_aoi, covered, _ = _coverage_grid(aoi, fps, selected, cell)
    frac = _uncovered_fraction(in_aoi, covered)

    x0a = min(p[0] for p in aoi)
    y0a = min(p[1] for p in aoi)
    while frac > max_uncovered:
        hole = in_aoi & ~covered
        rows, cols = np.nonzero(hole)
        px = x0a + cell * (cols + 0.5)
        py = y0a + cell * (rows + 0.5)
        best = None
        for i, f in enumerate(fps):
            if i in selected:
                continue
            # how many hole cells this candidate would plug
            gain = int(points_in_polygon(px, py, f.polygon).sum())
            if gain > 0 and (best is None or gain > best[0]):
                best = (gain, i)
        if best is None:
            log.warning("best effort: uncovered fraction %.4f exceeds cap "
                        "%.4f and no remaining image helps", frac,
                        max_uncovered)
            break
        selected.add(best[1])
        in_aoi, covered, _ = _coverage_grid(aoi, fps, selected, cell)
        frac = _uncovered_fraction(in_aoi, covered)

    chosen = [fps[i] for i in sorted(selected)]
    return chosen, frac


def coverage_report(selected: list[Footprint],
                    aoi: list[tuple[float, float]],
                    cell: float | None = None) -> dict:
    """JSON-ready summary: how much of the AOI the selection leaves exposed,
    and a bounding box per connected gap."""
    if not selected:
        raise CoverageError("no selected footprints to report on")
    if cell is None:
        cell = _median([_footprint_short_side(f) for f in selected]) / 20.0
    in_aoi, covered, (x0, y0, ncols, nrows) = _coverage_grid(
        aoi, selected, range(len(selected)), cell)
    frac = _uncovered_fraction(in_aoi, covered)
    hole = in_aoi & ~covered

    seen = np.zeros_like(hole)
    gaps = []
    for r in range(nrows):
        for c in range(ncols):
            if not hole[r, c] or seen[r, c]:
                continue
            queue = deque([(r, c)])
            seen[r, c] = True
            cells = []
            while queue:
                rr, cc = queue.popleft()
                cells.append((rr, cc))
                for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    r2, c2 = rr + dr, cc + dc
                    if 0 <= r2 < nrows and 0 <= c2 < ncols \
                            and hole[r2, c2] and not seen[r2, c2]:
                        seen[r2, c2] = True
                        queue.append((r2, c2))
            rs = [rc[0] for rc in cells]
            cs = [rc[1] for rc in cells]
            gaps.append({
                "min_x": x0 + cell * min(cs), "min_y": y0 + cell * min(rs),
                "max_x": x0 + cell * (max(cs) + 1),
                "max_y": y0 + cell * (max(rs) + 1),
                "cells": len(cells),
            })
    gaps.sort(key=lambda g: (-g["cells"], g["min_x"], g["min_y"]))
    return {"selected_count": len(selected), "uncovered_fraction": frac,
            "cell_size": cell, "gaps": gaps}
