"""Forward-project image-space detections onto the terrain and into
orthomosaic pixels.

Geometry conventions
--------------------
The reconstruction stores world-to-camera poses: a point X in the (topocentric)
reconstruction frame maps to camera coordinates p = R·X + t, with +z forward,
+x right, +y down. The camera center is C = -R^T·t; adding the planimetric geo
offset moves C (and any reconstruction-frame point) into UTM. A pixel
(col, row) - pixel centers, (0, 0) at the top-left center - back-projects
through normalized coordinates

    x_n = (col - (w-1)/2) / (f * max(w, h)),   y_n likewise with h,

to the camera-frame direction (x_n, y_n, 1).

Terrain intersection marches the ray on a fixed t-lattice (multiples of the
step size, anchored at t = 0) until the ray drops below the bilinear surface,
then bisects the bracketing segment. Because the lattice never depends on any
search window, restricting the march to a region of interest samples exactly
the same points and returns bit-identical hits - the ROI is purely a search
bound, and any box it fails on is retried against the full grid.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .formats.coco import BBox, Detection, DetectionSet, ImageInfo, iou
from .formats.reconstruction import CameraIntrinsics, ShotPose
from .geodesy import AffineGeotransform, world_to_pixel
from .raster import RasterGrid, sample_bilinear

__all__ = ["ProjectorError", "Ray", "ProjectionResult", "ProjectionRow",
           "camera_center", "pixel_to_ray", "intersect_ray_dsm",
           "project_world_to_pixel", "project_bbox", "project_batch",
           "write_projection_csv", "read_projection_csv", "CSV_COLUMNS",
           "STATUS_OK", "STATUS_OUT_OF_DSM", "STATUS_NO_INTERSECTION",
           "STATUS_BEHIND_CAMERA"]

STATUS_OK = "ok"
STATUS_OUT_OF_DSM = "out_of_dsm"
STATUS_NO_INTERSECTION = "no_intersection"
STATUS_BEHIND_CAMERA = "behind_camera"
# report the dominant failure mode; ties resolved in this order
_FAILURE_ORDER = (STATUS_OUT_OF_DSM, STATUS_NO_INTERSECTION,
                  STATUS_BEHIND_CAMERA)

DEFAULT_MAX_RANGE = 10_000.0


class ProjectorError(ValueError):
    """Geometrically unusable input (pose, pixel, or ray)."""


@dataclass(frozen=True)
class Ray:
    origin: tuple[float, float, float]
    dir: tuple[float, float, float]

    def __post_init__(self):
        n = math.sqrt(sum(c * c for c in self.dir))
        if abs(n - 1.0) > 1e-12:
            raise ProjectorError(f"ray direction norm {n} != 1")

    def at(self, t: float) -> tuple[float, float, float]:
        return (self.origin[0] + t * self.dir[0],
                self.origin[1] + t * self.dir[1],
                self.origin[2] + t * self.dir[2])


@dataclass(frozen=True)
class ProjectionResult:
    source_image: str
    source_bbox: BBox
    world_bbox: tuple[float, float, float, float] | None   # min_x, min_y, max_x, max_y
    ortho_bbox: BBox | None
    status: str

    def __post_init__(self):
        if (self.status == STATUS_OK) != (self.world_bbox is not None):
            raise ProjectorError("world box present iff status ok")
        if (self.status == STATUS_OK) != (self.ortho_bbox is not None):
            raise ProjectorError("ortho box present iff status ok")


def camera_center(shot: ShotPose, offset: tuple[float, float] = (0.0, 0.0)) \
        -> tuple[float, float, float]:
    """UTM position of the projection center: C = -R^T t, shifted by offset."""
    r = shot.rotation_matrix()
    t = shot.translation
    c = -(r.T @ t)
    return (float(c[0]) + offset[0], float(c[1]) + offset[1], float(c[2]))


def pixel_to_ray(cam: CameraIntrinsics, shot: ShotPose,
                 pixel: tuple[float, float],
                 offset: tuple[float, float] = (0.0, 0.0)) -> Ray:
    """World-frame viewing ray through a pixel center."""
    col, row = pixel
    if not (-0.5 <= col <= cam.width - 0.5 and -0.5 <= row <= cam.height - 0.5):
        raise ProjectorError(f"pixel ({col}, {row}) outside "
                             f"{cam.width}x{cam.height} image")
    f = cam.focal_px
    xn = (col - (cam.width - 1) / 2.0) / f
    yn = (row - (cam.height - 1) / 2.0) / f
    r = shot.rotation_matrix()
    d = r.T @ (xn, yn, 1.0)
    n = float(math.sqrt(d @ d))
    if n == 0.0:
        raise ProjectorError("zero-norm direction")
    return Ray(camera_center(shot, offset),
               (float(d[0]) / n, float(d[1]) / n, float(d[2]) / n))


def _surface_gap(ray: Ray, dsm: RasterGrid, t: float,
                 clip: tuple[float, float, float, float] | None) -> float | None:
    """Ray height minus surface height at parameter t; None where the surface
    is not defined (outside the search region, off-grid, or a nodata hole)."""
    x, y, z = ray.at(t)
    if clip is not None and not (clip[0] <= x <= clip[2]
                                 and clip[1] <= y <= clip[3]):
        return None
    if not dsm.contains_world(x, y):
        return None
    v = sample_bilinear(dsm, x, y)
    if v is None:
        return None
    return z - v


def intersect_ray_dsm(ray: Ray, dsm: RasterGrid, *, step: float | None = None,
                      max_range: float = DEFAULT_MAX_RANGE, tol: float = 1e-3,
                      clip: tuple[float, float, float, float] | None = None,
                      _retry: bool = True) \
        -> tuple[tuple[float, float, float] | None, str]:
    """First ray-surface crossing, or (None, failure status).

    Marches on the lattice {k*step} until the ray passes below the bilinear
    surface, then bisects to ``tol``. Lattice points above the grid's highest
    sample are skipped wholesale - the surface cannot be up there - which
    keeps long descents from high cameras cheap without changing the lattice.
    A march that ends without a bracket is retried once at half step, to catch
    grazing rays stepping over a narrow bump.
    """
    if ray.dir[2] >= 0.0:
        return None, STATUS_BEHIND_CAMERA
    if step is None:
        step = dsm.gt.pixel_w
    if step <= 0:
        raise ProjectorError(f"step must be positive, got {step}")

    g0 = _surface_gap(ray, dsm, 0.0, clip)
    if g0 is not None and g0 <= 0.0:
        raise ProjectorError("ray origin at or below the surface")

    t = 0.0
    zmax = dsm.zmax()
    if math.isfinite(zmax) and ray.origin[2] > zmax:
        t = math.floor((ray.origin[2] - zmax) / -ray.dir[2] / step) * step

    hit_t = None
    was_inside = g0 is not None
    exited = False
    while t <= max_range:
        t += step
        g = _surface_gap(ray, dsm, t, clip)
        if g is None:
            if was_inside:
                exited = True
                break
            continue
        was_inside = True
        if g <= 0.0:
            hit_t = t
            break

    if hit_t is None:
        if _retry:
            return intersect_ray_dsm(ray, dsm, step=step / 2.0,
                                     max_range=max_range, tol=tol, clip=clip,
                                     _retry=False)
        if exited or not was_inside:
            return None, STATUS_OUT_OF_DSM
        return None, STATUS_NO_INTERSECTION

    lo, hi = hit_t - step, hit_t
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        g = _surface_gap(ray, dsm, mid, clip)
        if g is not None and g <= 0.0:
            hi = mid
        else:
            lo = mid
    return ray.at(hi), STATUS_OK


def project_world_to_pixel(cam: CameraIntrinsics, shot: ShotPose,
                           world: tuple[float, float, float],
                           offset: tuple[float, float] = (0.0, 0.0)) \
        -> tuple[float, float]:
    """Image pixel seeing a world point; raises if the point is behind the
    camera plane."""
    r = shot.rotation_matrix()
    x = (world[0] - offset[0], world[1] - offset[1], world[2])
    p = r @ x + shot.translation
    if p[2] <= 0.0:
        raise ProjectorError(f"point {world} behind camera {shot.image_name}")
    f = cam.focal_px
    return (float(p[0] / p[2]) * f + (cam.width - 1) / 2.0,
            float(p[1] / p[2]) * f + (cam.height - 1) / 2.0)


def _bbox_sample_points(bbox: BBox, cam: CameraIntrinsics,
                        dense: bool) -> list[tuple[float, float]]:
    """Corners plus edge midpoints (16 perimeter points when dense), clamped
    to the image extent so edge-touching boxes stay castable."""
    n = 4 if dense else 2
    xs = [bbox.x + bbox.w * i / n for i in range(n + 1)]
    ys = [bbox.y + bbox.h * i / n for i in range(n + 1)]
    pts = {(x, ys[0]) for x in xs} | {(x, ys[-1]) for x in xs} \
        | {(xs[0], y) for y in ys} | {(xs[-1], y) for y in ys}

    def clamp(v, hi):
        return min(max(v, -0.5), hi - 0.5)

    return sorted((clamp(px, cam.width), clamp(py, cam.height))
                  for px, py in pts)


def _roi_window(rays: list[Ray], dsm: RasterGrid, roi_margin: float) \
        -> tuple[float, float, float, float] | None:
    """Coarse ground window: drop every ray to a flat plane at the terrain
    height under the camera (grid mid-height as fallback), then pad the hull
    of the hits by roi_margin of its extent per side."""
    origin = rays[0].origin
    z_est = None
    if dsm.contains_world(origin[0], origin[1]):
        z_est = sample_bilinear(dsm, origin[0], origin[1])
    if z_est is None:
        zmax = dsm.zmax()
        if not math.isfinite(zmax):
            return None
        zmin = float(dsm.values[dsm.valid_mask()].min())
        z_est = (zmax + zmin) / 2.0
    if origin[2] <= z_est:
        return None
    pts = []
    for ray in rays:
        if ray.dir[2] >= 0.0:
            continue
        t = (origin[2] - z_est) / -ray.dir[2]
        x, y, _ = ray.at(t)
        pts.append((x, y))
    if not pts:
        return None
    minx = min(p[0] for p in pts)
    maxx = max(p[0] for p in pts)
    miny = min(p[1] for p in pts)
    maxy = max(p[1] for p in pts)
    pad = dsm.gt.pixel_w * 2.0
    px = (maxx - minx) * roi_margin / 2.0 + pad
    py = (maxy - miny) * roi_margin / 2.0 + pad
    return (minx - px, miny - py, maxx + px, maxy + py)


def _cast_points(points, cam, shot, dsm, offset, clip, step, max_range, tol):
    hits = []
    failures = []
    for px, py in points:
        ray = pixel_to_ray(cam, shot, (px, py), offset)
        point, status = intersect_ray_dsm(ray, dsm, step=step,
                                          max_range=max_range, tol=tol,
                                          clip=clip)
        if status == STATUS_OK:
            hits.append(point)
        else:
            failures.append(status)
    return hits, failures


def project_bbox(cam: CameraIntrinsics, shot: ShotPose, bbox: BBox,
                 dsm: RasterGrid, ortho_gt: AffineGeotransform, *,
                 offset: tuple[float, float] = (0.0, 0.0),
                 roi_margin: float = 0.25, step: float | None = None,
                 max_range: float = DEFAULT_MAX_RANGE, tol: float = 1e-3,
                 dense: bool = False, use_roi: bool = True) -> ProjectionResult:
    """Cast a detection's outline to the ground and bound it in world and
    orthomosaic coordinates.

    The box is sampled at its corners and edge midpoints (``dense`` raises
    that to 16 perimeter points); ok requires three quarters of the samples
    to land. The ROI window only narrows the search - when the windowed pass
    falls short, the full grid is tried before declaring failure.
    """
    points = _bbox_sample_points(bbox, cam, dense)
    need = math.ceil(0.75 * len(points))
    clip = None
    if use_roi:
        rays = [pixel_to_ray(cam, shot, p, offset) for p in points]
        clip = _roi_window(rays, dsm, roi_margin)

    hits, failures = _cast_points(points, cam, shot, dsm, offset, clip,
                                  step, max_range, tol)
    if len(hits) < need and clip is not None:
        hits, failures = _cast_points(points, cam, shot, dsm, offset, None,
                                      step, max_range, tol)

    if len(hits) < need:
        counts = Counter(failures)
        status = max(_FAILURE_ORDER,
                     key=lambda s: (counts.get(s, 0),
                                    -_FAILURE_ORDER.index(s)))
        return ProjectionResult(shot.image_name, bbox, None, None, status)

    world = (min(p[0] for p in hits), min(p[1] for p in hits),
             max(p[0] for p in hits), max(p[1] for p in hits))
    corners = [world_to_pixel(ortho_gt, x, y)
               for x in (world[0], world[2]) for y in (world[1], world[3])]
    col0 = math.floor(min(c for c, _ in corners))
    col1 = math.ceil(max(c for c, _ in corners))
    row0 = math.floor(min(r for _, r in corners))
    row1 = math.ceil(max(r for _, r in corners))
    ortho = BBox(float(col0), float(row0),
                 float(max(col1 - col0, 1)), float(max(row1 - row0, 1)))
    return ProjectionResult(shot.image_name, bbox, world, ortho, STATUS_OK)


@dataclass(frozen=True)
class ProjectionRow:
    image: str
    det_id: int
    score: float
    result: ProjectionResult


def project_batch(dets: DetectionSet, images: list[ImageInfo],
                  cameras: dict[str, CameraIntrinsics], shots: list[ShotPose],
                  dsm: RasterGrid, ortho_gt: AffineGeotransform, *,
                  offset: tuple[float, float] = (0.0, 0.0),
                  nms_iou: float = 0.5, roi_margin: float = 0.25,
                  step: float | None = None,
                  max_range: float = DEFAULT_MAX_RANGE, tol: float = 1e-3,
                  dense: bool = False, use_roi: bool = True) \
        -> tuple[list[ProjectionRow], list[int], dict]:
    """Project every detection; deduplicate the successes across overlapping
    source images.

    Returns (rows ordered by (image, det_id), indices of rows kept by the
    world-space NMS, summary). The georeferencing rate is ok/total before
    deduplication; ``unique`` counts the NMS survivors.
    """
    name_of = {im.id: im.file_name for im in images}
    shot_of = {s.image_name: s for s in shots}
    ordered: list[tuple[str, int, Detection]] = []
    counter: dict[int, int] = {}
    for d in dets.detections:
        if d.image_id not in name_of:
            raise ProjectorError(f"detection references unknown image id "
                                 f"{d.image_id}")
        counter[d.image_id] = counter.get(d.image_id, 0) + 1
        ordered.append((name_of[d.image_id], counter[d.image_id], d))
    ordered.sort(key=lambda r: (r[0], r[1]))

    rows = []
    row_categories = []
    for image_name, det_id, d in ordered:
        shot = shot_of.get(image_name)
        if shot is None:
            raise ProjectorError(f"no camera pose for image {image_name!r}")
        cam = cameras.get(shot.camera_key)
        if cam is None:
            raise ProjectorError(f"shot {image_name!r} references unknown "
                                 f"camera {shot.camera_key!r}")
        res = project_bbox(cam, shot, d.bbox, dsm, ortho_gt, offset=offset,
                           roi_margin=roi_margin, step=step,
                           max_range=max_range, tol=tol, dense=dense,
                           use_roi=use_roi)
        rows.append(ProjectionRow(image_name, det_id, d.score, res))
        row_categories.append(d.category_id)

    ok_idx = [i for i, r in enumerate(rows) if r.result.status == STATUS_OK]
    world_det = {}
    for i in ok_idx:
        w = rows[i].result.world_bbox
        world_det[i] = Detection(0, row_categories[i],
                                 BBox(w[0], w[1], w[2] - w[0], w[3] - w[1]),
                                 rows[i].score)
    order = sorted(ok_idx, key=lambda i: (-rows[i].score, rows[i].image,
                                          rows[i].det_id))
    kept: list[int] = []
    for i in order:
        d = world_det[i]
        if any(world_det[k].category_id == d.category_id
               and iou(world_det[k].bbox, d.bbox) >= nms_iou for k in kept):
            continue
        kept.append(i)
    kept.sort()
    summary = {"total": len(rows), "ok": len(ok_idx),
               "rate": len(ok_idx) / len(rows) if rows else 0.0,
               "unique": len(kept)}
    return rows, kept, summary


CSV_COLUMNS = ("image", "det_id", "score", "src_x", "src_y", "src_w", "src_h",
               "min_e", "min_n", "max_e", "max_n",
               "ortho_x", "ortho_y", "ortho_w", "ortho_h", "status")


def write_projection_csv(rows: list[ProjectionRow], path: str | Path) -> None:
    """One row per detection; world/ortho fields empty unless status ok."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_COLUMNS)
        for r in rows:
            b = r.result.source_bbox
            rec = [r.image, r.det_id, repr(r.score),
                   repr(b.x), repr(b.y), repr(b.w), repr(b.h)]
            if r.result.status == STATUS_OK:
                rec += [repr(v) for v in r.result.world_bbox]
                ob = r.result.ortho_bbox
                rec += [repr(ob.x), repr(ob.y), repr(ob.w), repr(ob.h)]
            else:
                rec += [""] * 8
            rec.append(r.result.status)
            w.writerow(rec)


def read_projection_csv(path: str | Path) -> list[ProjectionRow]:
    rows = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ProjectorError(f"unexpected projection CSV header in {path}")
        for rec in reader:
            status = rec["status"]
            bbox = BBox(float(rec["src_x"]), float(rec["src_y"]),
                        float(rec["src_w"]), float(rec["src_h"]))
            world = ortho = None
            if status == STATUS_OK:
                world = (float(rec["min_e"]), float(rec["min_n"]),
                         float(rec["max_e"]), float(rec["max_n"]))
                ortho = BBox(float(rec["ortho_x"]), float(rec["ortho_y"]),
                             float(rec["ortho_w"]), float(rec["ortho_h"]))
            rows.append(ProjectionRow(
                rec["image"], int(rec["det_id"]), float(rec["score"]),
                ProjectionResult(rec["image"], bbox, world, ortho, status)))
    return rows
