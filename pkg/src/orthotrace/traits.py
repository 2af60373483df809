"""Per-plant trait extraction and predicted-vs-manual agreement statistics.

Georeferenced detector boxes become rectangular ground polygons (optionally
exported as a shapefile), and any single-band raster - canopy height, a
vegetation index - is summarized per polygon. Cells are assigned by a
cell-center rule, inclusive on minimum edges and exclusive on maximum
edges, so edge-adjacent plant rectangles never claim the same cell. Which
summary best represents a trait like plant height is crop-dependent, so the
statistic set is caller-chosen (mean, median, percentiles, ...).

Agreement between predicted and manually drawn records pairs polygons by
world-space IoU, greedily from the highest overlap down, and compares each
shared statistic with sample Pearson correlation, a two-sample
Kolmogorov-Smirnov test, and the mean absolute difference. The KS p-value
is the asymptotic Kolmogorov tail; below roughly 20 samples per side it is
only indicative.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .formats.shapefile import write_shapefile
from .geodesy import pixel_to_world, world_to_pixel
from .geometry import points_in_polygon
from .projector import STATUS_OK, read_projection_csv
from .raster import RasterCrs, RasterGrid

__all__ = ["TraitsError", "TraitRecord", "SOURCE_PREDICTED", "SOURCE_MANUAL",
           "boxes_to_polygons", "rasterize_polygon", "zonal_stats",
           "pearson_r", "ks_2samp", "kolmogorov_sf", "agreement_report",
           "write_traits_csv", "read_traits_csv"]

SOURCE_PREDICTED = "predicted"
SOURCE_MANUAL = "manual"

_BASIC_STATS = ("mean", "std", "min", "max", "median", "count")
_PERCENTILE_RE = re.compile(r"^p(\d{1,3})$")


class TraitsError(ValueError):
    """Bad trait inputs: malformed polygons, stats, or sample vectors."""


@dataclass(frozen=True)
class TraitRecord:
    plant_id: int
    polygon: tuple[tuple[float, float], ...]
    stats: dict[str, float | None] = field(default_factory=dict)
    source: str = SOURCE_PREDICTED

    def __post_init__(self):
        if len(self.polygon) < 3:
            raise TraitsError(f"plant {self.plant_id}: polygon needs at "
                              f"least 3 vertices, got {len(self.polygon)}")
        if self.source not in (SOURCE_PREDICTED, SOURCE_MANUAL):
            raise TraitsError(f"source must be {SOURCE_PREDICTED!r} or "
                              f"{SOURCE_MANUAL!r}, got {self.source!r}")


def boxes_to_polygons(csv_path: str | Path, crs: RasterCrs | None = None,
                      shapefile_path: str | Path | None = None) \
        -> tuple[list[TraitRecord], int]:
    """Closed ground rectangles from a projection CSV.

    Only rows whose projection succeeded become polygons; the second return
    value counts the skipped rows. ``shapefile_path`` additionally writes
    .shp/.shx/.dbf/.prj with the detection score as an attribute column.
    """
    rows = read_projection_csv(csv_path)
    records = []
    scores = []
    skipped = 0
    for row in rows:
        if row.result.status != STATUS_OK:
            skipped += 1
            continue
        x0, y0, x1, y1 = row.result.world_bbox
        poly = ((x0, y0), (x1, y0), (x1, y1), (x0, y1))
        records.append(TraitRecord(len(records) + 1, poly))
        scores.append(row.score)
    if shapefile_path is not None:
        if crs is None:
            raise TraitsError("shapefile export needs a coordinate system")
        write_shapefile([list(r.polygon) for r in records],
                        [r.plant_id for r in records], crs, shapefile_path,
                        fields={"score": scores})
    return records, skipped


def rasterize_polygon(poly, g: RasterGrid) -> set[tuple[int, int]]:
    """Grid cells whose centers fall inside ``poly`` (half-open edge rule).

    Cells outside the raster are silently clipped away.
    """
    if len(poly) < 3:
        raise TraitsError(f"polygon needs at least 3 vertices, got {len(poly)}")
    cols = []
    rows = []
    for x, y in poly:
        c, r = world_to_pixel(g.gt, x, y)
        cols.append(c)
        rows.append(r)
    c0 = max(0, math.floor(min(cols)) - 1)
    c1 = min(g.width - 1, math.ceil(max(cols)) + 1)
    r0 = max(0, math.floor(min(rows)) - 1)
    r1 = min(g.height - 1, math.ceil(max(rows)) + 1)
    if c1 < c0 or r1 < r0:
        return set()
    cc, rr = np.meshgrid(np.arange(c0, c1 + 1), np.arange(r0, r1 + 1))
    gt = g.gt
    xs = gt.origin_x + cc * gt.pixel_w + rr * gt.rot_x
    ys = gt.origin_y + cc * gt.rot_y + rr * gt.pixel_h
    hit = points_in_polygon(xs, ys, poly)
    return {(int(c), int(r)) for c, r in zip(cc[hit].ravel(), rr[hit].ravel())}


def _parse_stat(name: str):
    if name in _BASIC_STATS:
        return name, None
    m = _PERCENTILE_RE.match(name)
    if m and 0 <= int(m.group(1)) <= 100:
        return "percentile", int(m.group(1))
    raise TraitsError(f"unknown statistic {name!r}; choose from "
                      f"{', '.join(_BASIC_STATS)} or pXX")


def zonal_stats(poly, g: RasterGrid, stats, *, plant_id: int = 0,
                source: str = SOURCE_PREDICTED) -> TraitRecord:
    """Summarize the raster over one polygon.

    Only valid (non-nodata, finite) covered cells contribute. ``std`` is the
    sample standard deviation (n-1 denominator, null for fewer than two
    cells); percentiles interpolate linearly. With zero valid cells every
    statistic is null and ``count`` is 0.
    """
    kinds = [(name, _parse_stat(name)) for name in stats]
    vals = np.array([float(g.values[r, c])
                     for c, r in rasterize_polygon(poly, g)])
    if vals.size:
        vals = vals[np.isfinite(vals)]
        if g.nodata is not None:
            vals = vals[vals != g.nodata]
    out: dict[str, float | None] = {}
    for name, (kind, q) in kinds:
        if kind == "count":
            out[name] = float(vals.size)
        elif vals.size == 0:
            out[name] = None
        elif kind == "mean":
            out[name] = float(vals.mean())
        elif kind == "std":
            out[name] = float(vals.std(ddof=1)) if vals.size > 1 else None
        elif kind == "min":
            out[name] = float(vals.min())
        elif kind == "max":
            out[name] = float(vals.max())
        elif kind == "median":
            out[name] = float(np.median(vals))
        else:
            out[name] = float(np.percentile(vals, q))
    return TraitRecord(plant_id, tuple(poly), out, source)


def pearson_r(x, y) -> float:
    """Sample Pearson correlation of two equal-length vectors."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise TraitsError(f"need two equal-length vectors, got "
                          f"{xa.shape} and {ya.shape}")
    if xa.size < 2:
        raise TraitsError("correlation needs at least 2 points")
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0.0 or sy == 0.0:
        raise TraitsError("correlation undefined for zero-variance input")
    return min(1.0, max(-1.0, float(dx @ dy) / (sx * sy)))


def kolmogorov_sf(lam: float) -> float:
    """Asymptotic Kolmogorov tail 2*sum_k (-1)^(k-1) exp(-2 k^2 lam^2).

    Terms below 1e-12 are dropped; the result is clamped to [0, 1].
    """
    if lam <= 0.0:
        return 1.0
    total = 0.0
    for k in range(1, 100_000):
        term = math.exp(-2.0 * k * k * lam * lam)
        if term < 1e-12:
            break
        total += term if k % 2 else -term
    return min(1.0, max(0.0, 2.0 * total))


def ks_2samp(x, y) -> dict[str, float]:
    """Two-sample Kolmogorov-Smirnov D and asymptotic p-value.

    D is the largest gap between the two right-continuous empirical CDFs,
    evaluated at every sample point.
    """
    xa = np.sort(np.asarray(x, dtype=np.float64))
    ya = np.sort(np.asarray(y, dtype=np.float64))
    if xa.size == 0 or ya.size == 0:
        raise TraitsError("both samples must be non-empty")
    pts = np.concatenate([xa, ya])
    fx = np.searchsorted(xa, pts, side="right") / xa.size
    fy = np.searchsorted(ya, pts, side="right") / ya.size
    d = float(np.max(np.abs(fx - fy)))
    lam = d * math.sqrt(xa.size * ya.size / (xa.size + ya.size))
    return {"D": d, "p": kolmogorov_sf(lam)}


def _polygon_bounds(poly):
    xs = [p[0] for p in poly]
    ys = [p[1] for p in poly]
    return min(xs), min(ys), max(xs), max(ys)


_FIXED_COLUMNS = ("plant_id", "min_x", "min_y", "max_x", "max_y", "source")


def write_traits_csv(records: list[TraitRecord], path: str | Path) -> None:
    """One row per plant: id, bounding rectangle, source, then one column
    per statistic (union over records, in first-seen order; nulls empty)."""
    names: list[str] = []
    for r in records:
        for n in r.stats:
            if n not in names:
                names.append(n)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(_FIXED_COLUMNS + tuple(names))
        for r in records:
            x0, y0, x1, y1 = _polygon_bounds(r.polygon)
            row = [r.plant_id, repr(x0), repr(y0), repr(x1), repr(y1),
                   r.source]
            for n in names:
                v = r.stats.get(n)
                row.append("" if v is None else repr(v))
            w.writerow(row)


def read_traits_csv(path: str | Path) -> list[TraitRecord]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header[:6]) != _FIXED_COLUMNS:
            raise TraitsError(f"unexpected trait CSV header in {path}")
        names = header[6:]
        records = []
        for row in reader:
            if len(row) != len(header):
                raise TraitsError(f"row {len(records) + 2} of {path} has "
                                  f"{len(row)} fields, expected {len(header)}")
            x0, y0, x1, y1 = (float(v) for v in row[1:5])
            stats = {n: (None if v == "" else float(v))
                     for n, v in zip(names, row[6:])}
            records.append(TraitRecord(
                int(row[0]), ((x0, y0), (x1, y0), (x1, y1), (x0, y1)),
                stats, row[5]))
    return records


def _bounds_iou(a, b) -> float:
    w = min(a[2], b[2]) - max(a[0], b[0])
    h = min(a[3], b[3]) - max(a[1], b[1])
    if w <= 0.0 or h <= 0.0:
        return 0.0
    inter = w * h
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def agreement_report(predicted: list[TraitRecord], manual: list[TraitRecord],
                     iou_floor: float = 0.4) -> dict:
    """Compare predicted against manual records.

    Records pair greedily by descending world IoU of their polygon bounding
    boxes, each at most once, down to ``iou_floor``. Every statistic present
    and non-null on both sides of a pair is compared; correlation is null
    when fewer than two pairs carry the statistic or it has no variance.
    """
    if not predicted or not manual:
        raise TraitsError("need predicted and manual records to compare")
    if not 0.0 <= iou_floor <= 1.0:
        raise TraitsError(f"iou_floor must be in [0, 1], got {iou_floor}")
    pb = [_polygon_bounds(r.polygon) for r in predicted]
    mb = [_polygon_bounds(r.polygon) for r in manual]
    cands = []
    for i, a in enumerate(pb):
        for j, b in enumerate(mb):
            v = _bounds_iou(a, b)
            if v >= iou_floor:
                cands.append((v, i, j))
    cands.sort(key=lambda t: (-t[0], t[1], t[2]))
    taken_p: set[int] = set()
    taken_m: set[int] = set()
    pairs = []
    for v, i, j in cands:
        if i in taken_p or j in taken_m:
            continue
        taken_p.add(i)
        taken_m.add(j)
        pairs.append((predicted[i], manual[j], v))

    hist = [0] * 10
    for _, _, v in pairs:
        hist[min(int(v * 10.0), 9)] += 1

    names = sorted({n for p, m, _ in pairs
                    for n in set(p.stats) & set(m.stats)})
    traits = {}
    for name in names:
        both = [(p.stats[name], m.stats[name]) for p, m, _ in pairs
                if p.stats.get(name) is not None
                and m.stats.get(name) is not None]
        if not both:
            continue
        pv = np.array([b[0] for b in both])
        mv = np.array([b[1] for b in both])
        try:
            r = pearson_r(pv, mv)
        except TraitsError:
            r = None
        ks = ks_2samp(pv, mv)
        traits[name] = {"n": len(both), "r": r, "ks_d": ks["D"],
                        "ks_p": ks["p"],
                        "mean_abs_diff": float(np.mean(np.abs(pv - mv)))}
    return {"pairs": len(pairs),
            "unpaired_predicted": len(predicted) - len(pairs),
            "unpaired_manual": len(manual) - len(pairs),
            "iou_distribution": hist, "traits": traits}
