"""Stage orchestration: one structured config file, deterministic manifests.

A project is a directory holding a YAML config whose sections configure the
processing stages. ``run_stage`` executes one stage: it validates the
section against a schema (errors cite file and line), checks that every
declared input exists, runs the stage, and writes a JSON manifest recording
the parameter values and the SHA-256 of every input and output file.
Manifests contain nothing run-dependent - wall time goes to a separate
append-only log - so re-running on identical inputs produces byte-identical
outputs and manifests. Stages never modify their inputs; the GNSS-embedding
stage works on copies for that reason.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import tempfile
import time
from dataclasses import dataclass, replace
from pathlib import Path

import yaml

from . import coverage, evaluation, gcp_select, gps_embed, projector, tiler, traits
from .formats import coco
from .formats.gcp_list import GcpEntry
from .formats.reconstruction import read_geo_offset, read_reconstruction
from .geodesy import UtmCoord, read_world_file, wgs84_to_utm
from .raster import read_raster

__all__ = ["ConfigError", "PipelineError", "Config", "load_config",
           "run_stage", "run_pipeline", "stage_names", "atomic_write_bytes",
           "atomic_write_text", "read_gcp_world_csv", "read_aoi_csv"]


class ConfigError(ValueError):
    """Schema violation in the config file; message cites file and line."""


class PipelineError(ValueError):
    """Stage-level failure outside the config file itself."""


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via a temp file in the same directory plus rename, so readers
    only ever observe the old or the new content."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Config loading with per-key line numbers


@dataclass(frozen=True)
class Config:
    path: Path
    data: dict
    marks: dict

    @property
    def base_dir(self) -> Path:
        return self.path.parent

    def line(self, *trail) -> int:
        return self.marks.get(tuple(trail), 1)

    def err(self, message: str, *trail) -> ConfigError:
        return ConfigError(f"{self.path}:{self.line(*trail)}: {message}")

    def resolve(self, p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else self.base_dir / q


def load_config(path: str | Path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from None
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark else 1
        raise ConfigError(f"{path}:{line}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: config must be a mapping of sections")

    marks: dict[tuple, int] = {}

    def walk(node, trail):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                if isinstance(k, yaml.ScalarNode):
                    sub = trail + (k.value,)
                    walk(v, sub)
                    marks[sub] = k.start_mark.line + 1
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                walk(item, trail + (i,))
        marks.setdefault(trail, node.start_mark.line + 1)

    walk(root, ())
    return Config(path=path, data=data, marks=marks)


# ---------------------------------------------------------------------------
# Schemas


@dataclass(frozen=True)
class Key:
    name: str
    kind: str              # str|float|int|bool|path|dir|str_list|ratios|choice:a|b
    required: bool = False
    default: object = None
    is_input: bool = False          # existence checked and content hashed


def _check_kind(value, kind: str) -> bool:
    if kind.startswith("choice:"):
        return isinstance(value, str) and value in kind[7:].split("|")
    if kind in ("str", "path", "dir"):
        return isinstance(value, str)
    if kind == "float":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "bool":
        return isinstance(value, bool)
    if kind == "str_list":
        return (isinstance(value, list) and value
                and all(isinstance(v, str) for v in value))
    if kind == "ratios":
        return (isinstance(value, list) and len(value) == 3
                and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                        for v in value))
    raise AssertionError(f"unhandled kind {kind}")


_SCHEMAS: dict[str, tuple[Key, ...]] = {
    "gps-embed": (
        Key("log", "path", required=True, is_input=True),
        Key("images", "dir", required=True, is_input=True),
        Key("mode", "choice:nearest|interpolated", default="nearest"),
        Key("max_dt", "float", default=5.0),
        Key("clock_offset", "float", default=0.0),
        Key("disorder_tol", "float", default=0.0),
    ),
    "gcp-find": (
        Key("gcps", "path", required=True, is_input=True),
        Key("images", "dir", required=True, is_input=True),
        Key("radius", "float", required=True),
    ),
    "gcp-assemble": (
        Key("marks", "path", required=True, is_input=True),
        Key("gcps", "path", required=True, is_input=True),
        Key("out", "str", default="gcp_list.txt"),
    ),
    "select-min": (
        Key("reconstruction", "path", required=True, is_input=True),
        Key("dsm", "path", required=True, is_input=True),
        Key("geo_offset", "path", is_input=True),
        Key("aoi", "path", is_input=True),
        Key("line_gap", "float"),
        Key("h_overlap", "float", default=0.10),
        Key("v_overlap", "float", default=0.10),
        Key("max_uncovered", "float", default=0.01),
    ),
    "tile": (
        Key("annotations", "path", required=True, is_input=True),
        Key("tile_w", "int", default=1024),
        Key("tile_h", "int", default=1024),
        Key("overlap", "int", default=100),
        Key("min_retention", "float", default=0.3),
        Key("min_box_px", "float", default=4.0),
        Key("ratios", "ratios", default=[0.70, 0.15, 0.15]),
        Key("seed", "int", default=0),
        Key("group_by_source", "bool", default=False),
    ),
    "project": (
        Key("detections", "path", required=True, is_input=True),
        Key("images", "path", required=True, is_input=True),
        Key("reconstruction", "path", required=True, is_input=True),
        Key("dsm", "path", required=True, is_input=True),
        Key("ortho_world", "path", required=True, is_input=True),
        Key("geo_offset", "path", is_input=True),
        Key("nms_iou", "float", default=0.5),
        Key("roi_margin", "float", default=0.25),
        Key("dense", "bool", default=False),
    ),
    "eval": (
        Key("detections", "path", required=True, is_input=True),
        Key("ground_truth", "path", required=True, is_input=True),
        Key("iou", "float", default=0.5),
        Key("all_point", "bool", default=False),
    ),
    "traits": (
        Key("boxes", "path", required=True, is_input=True),
        Key("raster", "path", required=True, is_input=True),
        Key("stats", "str_list", required=True),
        Key("shapefile", "bool", default=False),
    ),
    "agree": (
        Key("pred", "path", required=True, is_input=True),
        Key("manual", "path", required=True, is_input=True),
        Key("iou_floor", "float", default=0.4),
    ),
}


def stage_names() -> list[str]:
    return sorted(_SCHEMAS)


def _validate_section(cfg: Config, stage: str) -> dict:
    schema = _SCHEMAS[stage]
    if stage not in cfg.data:
        raise cfg.err(f"missing section {stage!r}")
    section = cfg.data[stage]
    if not isinstance(section, dict):
        raise cfg.err(f"section {stage!r} must be a mapping", stage)
    known = {k.name for k in schema}
    for name in section:
        if name not in known:
            raise cfg.err(f"stage {stage!r}: unknown key {name!r} "
                          f"(known: {', '.join(sorted(known))})", stage, name)
    params = {}
    for key in schema:
        if key.name in section:
            value = section[key.name]
            if not _check_kind(value, key.kind):
                raise cfg.err(f"stage {stage!r}: key {key.name!r} must be "
                              f"{key.kind}, got {value!r}", stage, key.name)
            params[key.name] = value
        elif key.required:
            raise cfg.err(f"stage {stage!r}: missing required key "
                          f"{key.name!r}", stage)
        elif key.default is not None or key.kind == "bool":
            params[key.name] = key.default
    return params


def _check_inputs(cfg: Config, stage: str, params: dict) -> list[Path]:
    """Existence check for every input path; returns files to hash."""
    files: list[Path] = []
    for key in _SCHEMAS[stage]:
        if not key.is_input or key.name not in params:
            continue
        p = cfg.resolve(params[key.name])
        if key.kind == "dir":
            if not p.is_dir():
                raise cfg.err(f"stage {stage!r}: key {key.name!r} names a "
                              f"missing directory: {p}", stage, key.name)
            files.extend(sorted(q for q in p.iterdir() if q.is_file()))
        else:
            if not p.is_file():
                raise cfg.err(f"stage {stage!r}: key {key.name!r} names a "
                              f"missing input path: {p}", stage, key.name)
            files.append(p)
    return files


# ---------------------------------------------------------------------------
# Small input formats used only by stages


def read_gcp_world_csv(path: str | Path) \
        -> list[tuple[str, UtmCoord, float]]:
    """``name,easting,northing,zone,hemisphere,elevation`` per line."""
    import csv

    out = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        need = {"name", "easting", "northing", "zone", "hemisphere",
                "elevation"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise PipelineError(f"{path}: GCP table needs columns "
                                f"{', '.join(sorted(need))}")
        for i, row in enumerate(reader, start=2):
            try:
                out.append((row["name"],
                            UtmCoord(float(row["easting"]),
                                     float(row["northing"]),
                                     int(row["zone"]), row["hemisphere"]),
                            float(row["elevation"])))
            except (ValueError, TypeError) as exc:
                raise PipelineError(f"{path} line {i}: {exc}") from None
    if not out:
        raise PipelineError(f"{path}: no GCPs")
    names = [n for n, _, _ in out]
    if len(set(names)) != len(names):
        raise PipelineError(f"{path}: duplicate GCP names")
    return out


def read_aoi_csv(path: str | Path) -> list[tuple[float, float]]:
    """Polygon vertices, one ``x,y`` pair per line."""
    pts = []
    for i, line in enumerate(open(path), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise PipelineError(f"{path} line {i}: expected 'x,y'")
        pts.append((float(parts[0]), float(parts[1])))
    if len(pts) < 3:
        raise PipelineError(f"{path}: a polygon needs at least 3 vertices")
    return pts


def _load_offset(cfg: Config, params: dict) -> tuple[float, float]:
    if "geo_offset" not in params:
        return (0.0, 0.0)
    _, ox, oy = read_geo_offset(cfg.resolve(params["geo_offset"]))
    return (ox, oy)


# ---------------------------------------------------------------------------
# Stage bodies: each returns (report dict, list of output paths)


def _stage_gps_embed(cfg: Config, params: dict, out_dir: Path):
    src = cfg.resolve(params["images"])
    dst = out_dir / "images_gps"
    dst.mkdir(exist_ok=True)
    copies = []
    for p in sorted(src.iterdir()):
        if p.suffix.lower() in (".jpg", ".jpeg"):
            shutil.copyfile(p, dst / p.name)
            copies.append(dst / p.name)
    records, scan_errors = gps_embed.scan_images(dst)
    fixes = gps_embed.load_gnss_log(cfg.resolve(params["log"]),
                                    disorder_tol=params["disorder_tol"])
    match = (gps_embed.match_nearest if params["mode"] == "nearest"
             else gps_embed.match_interpolated)
    matches, unmatched = match(records, fixes, max_dt=params["max_dt"],
                               clock_offset=params["clock_offset"])
    report = gps_embed.embed_all(matches, unmatched)
    summary = dict(report.as_dict())
    summary["failures"] = sorted(
        [Path(p).name, msg] for p, msg in report.failures)
    summary["scan_errors"] = sorted(
        [Path(p).name, msg] for p, msg in scan_errors)
    summary["unmatched_images"] = sorted(
        Path(r.image_path).name for r in unmatched)
    report_path = out_dir / "gps_embed_report.json"
    atomic_write_text(report_path, _dump_json(summary))
    return summary, [report_path] + copies


def _image_positions(image_dir: Path) -> list[tuple[str, UtmCoord | None]]:
    records, _ = gps_embed.scan_images(image_dir)
    out = []
    for r in records:
        pos = wgs84_to_utm(r.gps) if r.gps is not None else None
        out.append((Path(r.image_path).name, pos))
    return out


def _stage_gcp_find(cfg: Config, params: dict, out_dir: Path):
    gcps = read_gcp_world_csv(cfg.resolve(params["gcps"]))
    positions = _image_positions(cfg.resolve(params["images"]))
    result = {}
    for name, world, _elev in gcps:
        ranked = gcp_select.candidate_images(world, positions,
                                             params["radius"])
        result[name] = [{"image": img, "distance_m": d} for img, d in ranked]
    out = out_dir / "gcp_candidates.json"
    atomic_write_text(out, _dump_json(result))
    summary = {"gcps": len(gcps),
               "with_candidates": sum(1 for v in result.values() if v)}
    return summary, [out]


def _stage_gcp_assemble(cfg: Config, params: dict, out_dir: Path):
    gcps = {name: (world, elev)
            for name, world, elev in
            read_gcp_world_csv(cfg.resolve(params["gcps"]))}
    with open(cfg.resolve(params["marks"])) as f:
        marks_doc = json.load(f)
    if not isinstance(marks_doc, list):
        raise PipelineError("marks file must be a JSON list")
    entries = []
    skipped_unconfirmed = 0
    for i, m in enumerate(marks_doc):
        try:
            name = m["gcp"]
            if not m.get("confirmed", False):
                skipped_unconfirmed += 1
                continue
            if name not in gcps:
                raise PipelineError(f"mark {i} references unknown GCP "
                                    f"{name!r}")
            world, elev = gcps[name]
            entries.append(GcpEntry(world, elev, float(m["col"]),
                                    float(m["row"]), m["image"]))
        except KeyError as exc:
            raise PipelineError(f"mark {i} is missing field {exc}") from None
    if not entries:
        raise PipelineError("no confirmed marks to assemble")
    world0 = entries[0].world
    proj_line = f"WGS84 UTM {world0.zone}{world0.hemisphere}"
    out = out_dir / params["out"]
    gcp_select.assemble_gcp_list(entries, proj_line, out)
    summary = {"lines": len(entries), "gcps": len({
        (e.world.easting, e.world.northing) for e in entries}),
        "skipped_unconfirmed": skipped_unconfirmed}
    return summary, [out]


def _stage_select_min(cfg: Config, params: dict, out_dir: Path):
    cameras, shots = read_reconstruction(cfg.resolve(params["reconstruction"]))
    dsm = read_raster(cfg.resolve(params["dsm"]))
    offset = _load_offset(cfg, params)
    fps = coverage.compute_footprints(shots, cameras, dsm=dsm, offset=offset)
    line_gap = params.get("line_gap")
    if line_gap is None:
        # half the median footprint short side separates serpentine rows
        line_gap = coverage._median(
            [coverage._footprint_short_side(f) for f in fps]) / 2.0
    clustered = coverage.cluster_flight_lines(fps, line_gap)
    aoi = (read_aoi_csv(cfg.resolve(params["aoi"]))
           if "aoi" in params else None)
    selected, frac = coverage.select_minimum_cover(
        clustered, aoi, min_h_overlap=params["h_overlap"],
        min_v_overlap=params["v_overlap"],
        max_uncovered=params["max_uncovered"])
    report = coverage.coverage_report(
        selected, aoi if aoi is not None else coverage.default_aoi(clustered))
    selected_path = out_dir / "selected_images.json"
    atomic_write_text(selected_path, _dump_json(
        {"selected": [f.image_name for f in selected],
         "uncovered_fraction": frac, "line_gap": line_gap,
         "total_images": len(fps)}))
    report_path = out_dir / "coverage_report.json"
    atomic_write_text(report_path, _dump_json(report))
    summary = {"selected": len(selected), "total": len(fps),
               "uncovered_fraction": frac}
    return summary, [selected_path, report_path]


def _stage_tile(cfg: Config, params: dict, out_dir: Path):
    aset = coco.read_coco(cfg.resolve(params["annotations"]))
    if not isinstance(aset, coco.AnnotationSet):
        raise PipelineError("tile stage needs a full annotation file, not a "
                            "bare detection list")
    spec = tiler.TileSpec(params["tile_w"], params["tile_h"],
                          params["overlap"], params["min_retention"],
                          params["min_box_px"])
    records = []
    for image in aset.images:
        records.extend(tiler.tile_image(aset, image, spec))
    splits = tiler.split_dataset(records, tuple(params["ratios"]),
                                 seed=params["seed"],
                                 group_by_source=params["group_by_source"])
    outputs = []
    counts = {}
    for name, recs in zip(("train", "val", "test"), splits):
        sub = tiler.records_to_annotation_set(recs, spec, aset.categories)
        path = out_dir / f"tiles_{name}.json"
        coco.write_coco(sub, path)
        outputs.append(path)
        counts[name] = {"tiles": len(recs),
                        "annotations": len(sub.annotations)}
    summary = {"source_images": len(aset.images), "tiles": len(records),
               "splits": counts}
    summary_path = out_dir / "tile_summary.json"
    atomic_write_text(summary_path, _dump_json(summary))
    return summary, outputs + [summary_path]


def _stage_project(cfg: Config, params: dict, out_dir: Path):
    dets = coco.read_coco(cfg.resolve(params["detections"]))
    if not isinstance(dets, coco.DetectionSet):
        raise PipelineError("detections file must be a bare detection list")
    aset = coco.read_coco(cfg.resolve(params["images"]))
    if not isinstance(aset, coco.AnnotationSet):
        raise PipelineError("images file must be a full annotation file")
    cameras, shots = read_reconstruction(cfg.resolve(params["reconstruction"]))
    dsm = read_raster(cfg.resolve(params["dsm"]))
    ortho_gt = read_world_file(cfg.resolve(params["ortho_world"]))
    offset = _load_offset(cfg, params)
    rows, kept, summary = projector.project_batch(
        dets, aset.images, cameras, shots, dsm, ortho_gt, offset=offset,
        nms_iou=params["nms_iou"], roi_margin=params["roi_margin"],
        dense=params["dense"])
    all_path = out_dir / "projected.csv"
    projector.write_projection_csv(rows, all_path)
    merged_path = out_dir / "projected_merged.csv"
    projector.write_projection_csv([rows[i] for i in kept], merged_path)
    summary_path = out_dir / "projection_summary.json"
    atomic_write_text(summary_path, _dump_json(summary))
    return summary, [all_path, merged_path, summary_path]


def _stage_eval(cfg: Config, params: dict, out_dir: Path):
    dets = coco.read_coco(cfg.resolve(params["detections"]))
    if not isinstance(dets, coco.DetectionSet):
        raise PipelineError("detections file must be a bare detection list")
    gts = coco.read_coco(cfg.resolve(params["ground_truth"]))
    if not isinstance(gts, coco.AnnotationSet):
        raise PipelineError("ground truth must be a full annotation file")
    metrics = evaluation.mean_ap(dets, gts)
    curve, best_f1 = evaluation.pr_curve(dets, gts, iou_thr=params["iou"])
    ap = evaluation.average_precision(curve, all_point=params["all_point"])
    metrics.update({
        "iou": params["iou"], "ap_at_iou": ap, "best_f1": best_f1,
        "per_iou": [list(p) for p in metrics["per_iou"]],
        "by_size": evaluation.size_stratified(dets, gts,
                                              iou_thr=params["iou"]),
    })
    out = out_dir / "metrics.json"
    atomic_write_text(out, _dump_json(metrics))
    summary = {"ap50": metrics["ap50"], "map5095": metrics["map5095"]}
    return summary, [out]


def _stage_traits(cfg: Config, params: dict, out_dir: Path):
    g = read_raster(cfg.resolve(params["raster"]))
    shp_base = out_dir / "plants" if params["shapefile"] else None
    if shp_base is not None and g.crs is None:
        raise PipelineError("raster carries no coordinate system; cannot "
                            "write a shapefile")
    records, skipped = traits.boxes_to_polygons(
        cfg.resolve(params["boxes"]), g.crs, shp_base)
    if not records:
        raise PipelineError("no successfully projected boxes to summarize")
    filled = [replace(r, stats=traits.zonal_stats(
        r.polygon, g, params["stats"]).stats) for r in records]
    out = out_dir / "traits.csv"
    traits.write_traits_csv(filled, out)
    outputs = [out]
    if shp_base is not None:
        outputs += [shp_base.with_suffix(ext)
                    for ext in (".shp", ".shx", ".dbf", ".prj")]
    summary = {"plants": len(filled), "skipped_rows": skipped}
    return summary, outputs


def _stage_agree(cfg: Config, params: dict, out_dir: Path):
    pred = traits.read_traits_csv(cfg.resolve(params["pred"]))
    manual = traits.read_traits_csv(cfg.resolve(params["manual"]))
    report = traits.agreement_report(pred, manual,
                                     iou_floor=params["iou_floor"])
    out = out_dir / "agreement.json"
    atomic_write_text(out, _dump_json(report))
    summary = {"pairs": report["pairs"]}
    return summary, [out]


_STAGE_FN = {
    "gps-embed": _stage_gps_embed,
    "gcp-find": _stage_gcp_find,
    "gcp-assemble": _stage_gcp_assemble,
    "select-min": _stage_select_min,
    "tile": _stage_tile,
    "project": _stage_project,
    "eval": _stage_eval,
    "traits": _stage_traits,
    "agree": _stage_agree,
}


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _out_dir(cfg: Config) -> Path:
    out = cfg.data.get("output", {})
    if not isinstance(out, dict) or not isinstance(out.get("dir", "out"), str):
        raise cfg.err("section 'output' must map 'dir' to a string", "output")
    d = cfg.resolve(out.get("dir", "out"))
    d.mkdir(parents=True, exist_ok=True)
    return d


def run_stage(config_path: str | Path, stage: str) -> Path:
    """Run one stage; returns the path of its manifest."""
    cfg = load_config(config_path)
    if stage not in _SCHEMAS:
        raise PipelineError(f"unknown stage {stage!r}; known: "
                            f"{', '.join(stage_names())}")
    params = _validate_section(cfg, stage)
    input_files = _check_inputs(cfg, stage, params)
    out_dir = _out_dir(cfg)

    inputs = {os.path.relpath(p, cfg.base_dir): _sha256(p)
              for p in input_files}
    t0 = time.perf_counter()
    summary, outputs = _STAGE_FN[stage](cfg, params, out_dir)
    wall = time.perf_counter() - t0

    manifest = {
        "stage": stage,
        "parameters": params,
        "inputs": inputs,
        "outputs": {os.path.relpath(p, cfg.base_dir): _sha256(p)
                    for p in sorted(set(map(Path, outputs)))},
        "summary": summary,
    }
    manifest_dir = out_dir / "manifests"
    manifest_dir.mkdir(exist_ok=True)
    manifest_path = manifest_dir / f"{stage}.json"
    atomic_write_text(manifest_path, _dump_json(manifest))
    with open(out_dir / "run_log.txt", "a") as f:
        f.write(f"{stage} wall_time_s {wall:.3f}\n")
    return manifest_path


def run_pipeline(config_path: str | Path) -> list[Path]:
    """Run every stage named by the config's top-level ``pipeline`` list."""
    cfg = load_config(config_path)
    stages = cfg.data.get("pipeline")
    if (not isinstance(stages, list) or not stages
            or not all(isinstance(s, str) for s in stages)):
        raise cfg.err("top-level 'pipeline' must list stage names",
                      "pipeline")
    for s in stages:
        if s not in _SCHEMAS:
            raise cfg.err(f"pipeline names unknown stage {s!r}", "pipeline")
    return [run_stage(config_path, s) for s in stages]
