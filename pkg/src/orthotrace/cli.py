"""Command-line front end.

Each subcommand is a thin flag-parsing wrapper over one library module; the
``run`` subcommand instead drives stages from a YAML project config and
writes manifests (see :mod:`orthotrace.pipeline`), and ``serve`` starts the
annotation HTTP service. Domain errors print one line to stderr and exit 1;
argparse handles usage errors with exit 2.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import coverage, evaluation, gcp_select, gps_embed, pipeline, projector, tiler, traits
from .formats import coco
from .formats.reconstruction import read_geo_offset, read_reconstruction
from .geodesy import read_world_file, wgs84_to_utm
from .raster import read_raster

__all__ = ["main"]


def _fail(msg: str) -> "int":
    print(f"error: {msg}", file=sys.stderr)
    return 1


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        pipeline.atomic_write_text(out, text)
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def _ratios(text: str) -> tuple[float, float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated "
                                         "numbers, e.g. 0.7,0.15,0.15")
    return tuple(parts)


# ---------------------------------------------------------------------------
# Subcommand bodies


def _cmd_gps_embed(a) -> int:
    records, scan_errors = gps_embed.scan_images(a.images)
    fixes = gps_embed.load_gnss_log(a.gnss, disorder_tol=a.disorder_tol)
    match = (gps_embed.match_interpolated if a.interpolate
             else gps_embed.match_nearest)
    matches, unmatched = match(records, fixes, max_dt=a.max_dt,
                               clock_offset=a.clock_offset)
    report = gps_embed.embed_all(matches, unmatched)
    summary = dict(report.as_dict())
    summary["failures"] = [[Path(p).name, m] for p, m in report.failures]
    summary["scan_errors"] = [[Path(p).name, m] for p, m in scan_errors]
    print(json.dumps(summary, sort_keys=True, indent=2))
    return 0 if not (report.failed or scan_errors) else 1


def _cmd_gcp_find(a) -> int:
    gcps = pipeline.read_gcp_world_csv(a.gcps)
    radius = a.radius
    if radius is None:
        if a.flight_alt is None or a.focal_norm is None:
            return _fail("give --radius, or --flight-alt and --focal-norm "
                         "so a default radius can be derived")
        from PIL import Image

        records, _ = gps_embed.scan_images(a.images)
        if not records:
            return _fail(f"no images under {a.images}")
        with Image.open(records[0].image_path) as im:
            w, h = im.size
        radius = gcp_select.default_radius(a.flight_alt, w, h, a.focal_norm)
    positions = []
    for r in gps_embed.scan_images(a.images)[0]:
        pos = wgs84_to_utm(r.gps) if r.gps is not None else None
        positions.append((Path(r.image_path).name, pos))
    result = {"radius_m": radius, "candidates": {
        name: [{"image": img, "distance_m": d}
               for img, d in gcp_select.candidate_images(world, positions,
                                                         radius)]
        for name, world, _ in gcps}}
    _write_or_print(json.dumps(result, sort_keys=True, indent=2), a.out)
    return 0


def _cmd_gcp_assemble(a) -> int:
    with open(a.marks) as f:
        marks_doc = json.load(f)
    gcps = {name: (world, elev)
            for name, world, elev in pipeline.read_gcp_world_csv(a.gcps)}
    entries = []
    for m in marks_doc:
        if not m.get("confirmed", False):
            continue
        if m["gcp"] not in gcps:
            return _fail(f"mark references unknown GCP {m['gcp']!r}")
        world, elev = gcps[m["gcp"]]
        entries.append(gcp_select.GcpEntry(world, elev, float(m["col"]),
                                           float(m["row"]), m["image"]))
    if not entries:
        return _fail("no confirmed marks to assemble")
    w0 = entries[0].world
    gcp_select.assemble_gcp_list(entries,
                                 f"WGS84 UTM {w0.zone}{w0.hemisphere}", a.out)
    print(f"wrote {len(entries)} entries to {a.out}")
    return 0


def _cmd_select_min(a) -> int:
    cameras, shots = read_reconstruction(a.reconstruction)
    dsm = read_raster(a.dsm)
    offset = (0.0, 0.0)
    if a.geo_offset:
        _, ox, oy = read_geo_offset(a.geo_offset)
        offset = (ox, oy)
    fps = coverage.compute_footprints(shots, cameras, dsm=dsm, offset=offset)
    line_gap = a.line_gap
    if line_gap is None:
        line_gap = coverage._median(
            [coverage._footprint_short_side(f) for f in fps]) / 2.0
    clustered = coverage.cluster_flight_lines(fps, line_gap)
    aoi = pipeline.read_aoi_csv(a.aoi) if a.aoi else None
    selected, frac = coverage.select_minimum_cover(
        clustered, aoi, min_h_overlap=a.h_overlap, min_v_overlap=a.v_overlap,
        max_uncovered=a.max_uncovered)
    out_dir = Path(a.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = [f.image_name for f in selected]
    pipeline.atomic_write_text(out_dir / "selected_images.txt",
                               "".join(n + "\n" for n in names))
    report = coverage.coverage_report(
        selected, aoi if aoi is not None else coverage.default_aoi(clustered))
    pipeline.atomic_write_text(out_dir / "coverage_report.json",
                               json.dumps(report, sort_keys=True, indent=2)
                               + "\n")
    print(f"selected {len(names)} of {len(fps)} images "
          f"(uncovered fraction {frac:.4f})")
    return 0


def _cmd_tile(a) -> int:
    from PIL import Image

    aset = coco.read_coco(a.coco)
    if not isinstance(aset, coco.AnnotationSet):
        return _fail("--coco must be a full annotation file with images")
    spec = tiler.TileSpec(a.tile, a.tile, a.overlap, a.min_retention,
                          a.min_box_px)
    records = []
    for image in aset.images:
        records.extend(tiler.tile_image(aset, image, spec))
    splits = tiler.split_dataset(records, a.ratios, seed=a.seed,
                                 group_by_source=a.group_by_source)
    image_dir = Path(a.images)
    out_dir = Path(a.out)
    for split_name, recs in zip(("train", "val", "test"), splits):
        img_out = out_dir / split_name / "images"
        img_out.mkdir(parents=True, exist_ok=True)
        sub = tiler.records_to_annotation_set(recs, spec, aset.categories)
        coco.write_coco(sub, out_dir / split_name / "annotations.json")
        by_source: dict[str, list] = {}
        for rec in recs:
            by_source.setdefault(rec.source.file_name, []).append(rec)
        for file_name, group in sorted(by_source.items()):
            src = image_dir / file_name
            if not src.is_file():
                return _fail(f"source image missing: {src}")
            with Image.open(src) as im:
                for rec in group:
                    r = rec.rect
                    crop = im.crop((r.x, r.y, r.x + r.w, r.y + r.h))
                    crop.save(img_out / (rec.name + ".jpg"))
        print(f"{split_name}: {len(recs)} tiles")
    return 0


def _cmd_project(a) -> int:
    loaded = coco.read_coco(a.detections)
    if isinstance(loaded, coco.DetectionSet):
        dets = loaded
        if not a.images:
            return _fail("--detections is a bare detection list; an "
                         "--images annotation file is needed for image "
                         "names and sizes")
        images_set = coco.read_coco(a.images)
        if not isinstance(images_set, coco.AnnotationSet):
            return _fail("--images must be a full annotation file")
        images = images_set.images
    else:
        # a full annotation file doubles as score-1.0 detections of itself
        dets = coco.DetectionSet([
            coco.Detection(an.image_id, an.category_id, an.bbox, 1.0)
            for an in loaded.annotations])
        images = loaded.images
    cameras, shots = read_reconstruction(a.reconstruction)
    dsm = read_raster(a.dsm)
    ortho_gt = read_world_file(a.ortho_geotransform)
    offset = (0.0, 0.0)
    if a.geo_offset:
        _, ox, oy = read_geo_offset(a.geo_offset)
        offset = (ox, oy)
    rows, kept, summary = projector.project_batch(
        dets, images, cameras, shots, dsm, ortho_gt, offset=offset,
        nms_iou=a.nms_iou, roi_margin=a.roi_margin, dense=a.dense)
    projector.write_projection_csv(rows, a.out)
    if a.merged:
        projector.write_projection_csv([rows[i] for i in kept], a.merged)
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_eval(a) -> int:
    dets = coco.read_coco(a.dets)
    if not isinstance(dets, coco.DetectionSet):
        return _fail("--dets must be a bare detection list")
    gts = coco.read_coco(a.gts)
    if not isinstance(gts, coco.AnnotationSet):
        return _fail("--gts must be a full annotation file")
    metrics = evaluation.mean_ap(dets, gts)
    curve, best_f1 = evaluation.pr_curve(dets, gts, iou_thr=a.iou)
    report = {"ap50": metrics["ap50"], "map5095": metrics["map5095"],
              "per_iou": [list(p) for p in metrics["per_iou"]],
              "iou": a.iou,
              "ap_at_iou": evaluation.average_precision(curve),
              "best_f1": best_f1}
    if a.by_size:
        report["by_size"] = evaluation.size_stratified(dets, gts,
                                                       iou_thr=a.iou)
    _write_or_print(json.dumps(report, sort_keys=True, indent=2), a.out)
    return 0


def _cmd_traits(a) -> int:
    g = read_raster(a.raster)
    stats = [s for s in a.stats.split(",") if s]
    if not stats:
        return _fail("--stats must name at least one statistic")
    shp_base = Path(a.shapefile) if a.shapefile else None
    if shp_base is not None and g.crs is None:
        return _fail("raster carries no coordinate system; cannot write "
                     "a shapefile")
    records, skipped = traits.boxes_to_polygons(a.boxes, g.crs, shp_base)
    if not records:
        return _fail("no successfully projected boxes to summarize")
    filled = [replace(r, stats=traits.zonal_stats(r.polygon, g, stats).stats)
              for r in records]
    traits.write_traits_csv(filled, a.out)
    print(f"wrote {len(filled)} plants to {a.out} "
          f"({skipped} rows skipped)")
    return 0


def _cmd_agree(a) -> int:
    pred = traits.read_traits_csv(a.pred)
    manual = traits.read_traits_csv(a.manual)
    report = traits.agreement_report(pred, manual, iou_floor=a.iou_floor)
    _write_or_print(json.dumps(report, sort_keys=True, indent=2), a.out)
    return 0


def _cmd_run(a) -> int:
    if a.stage:
        manifest = pipeline.run_stage(a.config, a.stage)
        print(f"wrote {manifest}")
    else:
        for manifest in pipeline.run_pipeline(a.config):
            print(f"wrote {manifest}")
    return 0


def _cmd_serve(a) -> int:
    from . import server

    server.serve(a.config, a.port)
    return 0


# ---------------------------------------------------------------------------
# Parser


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="orthotrace",
        description="UAV field mapping toolkit: GNSS tagging, GCP "
                    "selection, image-set thinning, tiling, detection "
                    "projection, evaluation, and per-plant summaries.")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("gps-embed",
                       help="write GNSS positions into image EXIF")
    q.add_argument("--images", required=True)
    q.add_argument("--gnss", required=True)
    q.add_argument("--max-dt", type=float, default=1.0)
    q.add_argument("--clock-offset", type=float, default=0.0)
    q.add_argument("--disorder-tol", type=float, default=0.0)
    q.add_argument("--interpolate", action="store_true")
    q.set_defaults(fn=_cmd_gps_embed)

    g = sub.add_parser("gcp", help="GCP candidate search and list assembly")
    gsub = g.add_subparsers(dest="gcp_command", required=True)
    q = gsub.add_parser("find", help="rank images near each GCP")
    q.add_argument("--images", required=True)
    q.add_argument("--gcps", required=True)
    q.add_argument("--radius", type=float)
    q.add_argument("--flight-alt", type=float)
    q.add_argument("--focal-norm", type=float)
    q.add_argument("--out")
    q.set_defaults(fn=_cmd_gcp_find)
    q = gsub.add_parser("assemble",
                        help="build gcp_list.txt from confirmed marks")
    q.add_argument("--marks", required=True)
    q.add_argument("--gcps", required=True)
    q.add_argument("--out", required=True)
    q.set_defaults(fn=_cmd_gcp_assemble)

    q = sub.add_parser("select-min",
                       help="choose the fewest images covering the AOI")
    q.add_argument("--reconstruction", required=True)
    q.add_argument("--dsm", required=True)
    q.add_argument("--geo-offset")
    q.add_argument("--aoi")
    q.add_argument("--line-gap", type=float)
    q.add_argument("--h-overlap", type=float, default=0.10)
    q.add_argument("--v-overlap", type=float, default=0.10)
    q.add_argument("--max-uncovered", type=float, default=0.01)
    q.add_argument("--out", default=".")
    q.set_defaults(fn=_cmd_select_min)

    q = sub.add_parser("tile", help="cut images and boxes into "
                                    "train/val/test tiles")
    q.add_argument("--coco", required=True)
    q.add_argument("--images", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--tile", type=int, default=1024)
    q.add_argument("--overlap", type=int, default=100)
    q.add_argument("--min-retention", type=float, default=0.3)
    q.add_argument("--min-box-px", type=float, default=4.0)
    q.add_argument("--ratios", type=_ratios, default=(0.70, 0.15, 0.15))
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--group-by-source", action="store_true")
    q.set_defaults(fn=_cmd_tile)

    q = sub.add_parser("project",
                       help="cast image-space boxes onto the orthomosaic")
    q.add_argument("--detections", required=True)
    q.add_argument("--images")
    q.add_argument("--reconstruction", required=True)
    q.add_argument("--geo-offset")
    q.add_argument("--dsm", required=True)
    q.add_argument("--ortho-geotransform", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--merged")
    q.add_argument("--nms-iou", type=float, default=0.5)
    q.add_argument("--roi-margin", type=float, default=0.25)
    q.add_argument("--dense", action="store_true")
    q.set_defaults(fn=_cmd_project)

    q = sub.add_parser("eval", help="detection metrics against ground truth")
    q.add_argument("--dets", required=True)
    q.add_argument("--gts", required=True)
    q.add_argument("--iou", type=float, default=0.5)
    q.add_argument("--by-size", action="store_true")
    q.add_argument("--out")
    q.set_defaults(fn=_cmd_eval)

    q = sub.add_parser("traits",
                       help="summarize a raster inside each plant box")
    q.add_argument("--boxes", required=True)
    q.add_argument("--raster", required=True)
    q.add_argument("--stats", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--shapefile")
    q.set_defaults(fn=_cmd_traits)

    q = sub.add_parser("agree",
                       help="compare predicted and manual trait tables")
    q.add_argument("--pred", required=True)
    q.add_argument("--manual", required=True)
    q.add_argument("--iou-floor", type=float, default=0.4)
    q.add_argument("--out")
    q.set_defaults(fn=_cmd_agree)

    q = sub.add_parser("run", help="run config-driven stages with manifests")
    q.add_argument("config")
    q.add_argument("stage", nargs="?")
    q.set_defaults(fn=_cmd_run)

    q = sub.add_parser("serve", help="start the annotation HTTP service")
    q.add_argument("config")
    q.add_argument("--port", type=int, default=8764)
    q.set_defaults(fn=_cmd_serve)

    return p


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
