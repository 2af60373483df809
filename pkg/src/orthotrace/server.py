"""HTTP service backing the browser annotation tools.

Serves a JSON API under ``/api/v1`` plus an optional static UI bundle. All
mutating endpoints are last-write-wins with a version counter surfaced to
clients (the response carries ``previous_version`` so a client that loaded
an older version can detect the overwrite and offer a reload). Writes are
serialized by a process-wide lock and use write-temp-rename, so a reader or
a crash can only ever observe a complete old or new document.

Endpoints:
  GET  /api/v1/project                     category palette + enabled features
  GET  /api/v1/images                      image listing with dimensions
  GET  /api/v1/images/{id}/file            original JPEG bytes
  GET  /api/v1/images/{id}/annotations     stored boxes + version
  POST /api/v1/images/{id}/annotations     replace boxes, bump version
  GET  /api/v1/gcps                        pixel-mark document + version
  POST /api/v1/gcps                        replace marks, bump version
  GET  /api/v1/gcps/candidates?gcp=NAME    images ranked by distance
  GET  /api/v1/projection/preview?image=ID stored boxes cast to the ortho
  POST /api/v1/export?format=coco|yolo|gcp_list
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from . import gcp_select, gps_embed, pipeline, projector
from .formats import coco
from .formats.reconstruction import read_geo_offset, read_reconstruction
from .geodesy import read_world_file, wgs84_to_utm
from .raster import read_raster

__all__ = ["ServerError", "ProjectState", "make_server", "serve"]

_MAX_CATEGORIES = 5


class ServerError(ValueError):
    """Configuration problem that prevents the service from starting."""


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


_SERVE_KEYS = {"images", "gcps", "radius", "categories", "reconstruction",
               "dsm", "ortho_world", "geo_offset", "manual_ortho", "ui"}


class ProjectState:
    """Everything a request handler needs, loaded once per process."""

    def __init__(self, config_path: str | Path):
        cfg = pipeline.load_config(config_path)
        section = cfg.data.get("serve")
        if not isinstance(section, dict):
            raise cfg.err("missing section 'serve'")
        for k in section:
            if k not in _SERVE_KEYS:
                raise cfg.err(f"serve: unknown key {k!r}", "serve", k)
        if "images" not in section:
            raise cfg.err("serve: missing required key 'images'", "serve")

        self.cfg = cfg
        self.lock = threading.Lock()
        self.image_dir = cfg.resolve(section["images"])
        if not self.image_dir.is_dir():
            raise cfg.err(f"serve: images directory missing: "
                          f"{self.image_dir}", "serve", "images")

        self.categories = section.get("categories", ["plant"])
        if (not isinstance(self.categories, list) or not self.categories
                or len(self.categories) > _MAX_CATEGORIES
                or not all(isinstance(c, str) for c in self.categories)):
            raise cfg.err(f"serve: 'categories' must list 1..."
                          f"{_MAX_CATEGORIES} names", "serve", "categories")
        self.radius = float(section.get("radius", 60.0))
        self.gcps_path = (cfg.resolve(section["gcps"])
                          if "gcps" in section else None)
        self.ui_dir = cfg.resolve(section["ui"]) if "ui" in section else None
        self._proj_keys = {k: cfg.resolve(section[k]) for k in
                           ("reconstruction", "dsm", "ortho_world",
                            "geo_offset", "manual_ortho") if k in section}
        self._proj_cache = None

        out = cfg.data.get("output", {})
        out_dir = cfg.resolve(out.get("dir", "out")
                              if isinstance(out, dict) else "out")
        self.store = out_dir / "annotations"
        self.store.mkdir(parents=True, exist_ok=True)
        self.export_dir = out_dir / "export"
        self.marks_path = out_dir / "gcp_marks.json"

        from PIL import Image

        self.images: list[dict] = []
        names = sorted(p.name for p in self.image_dir.iterdir()
                       if p.suffix.lower() in (".jpg", ".jpeg"))
        for i, name in enumerate(names, start=1):
            with Image.open(self.image_dir / name) as im:
                w, h = im.size
            self.images.append({"id": i, "file_name": name,
                                "width": w, "height": h})

    def describe(self) -> dict:
        """Project descriptor: everything a client needs to set itself up.

        A browser client keeps no local configuration, so the declared
        category palette and which optional features are wired up must be
        discoverable over the API.
        """
        return {
            "categories": list(self.categories),
            "gcps_configured": self.gcps_path is not None,
            "preview_configured": all(
                k in self._proj_keys
                for k in ("reconstruction", "dsm", "ortho_world")),
            "radius_m": self.radius,
            "image_count": len(self.images),
        }

    # -- stored documents --------------------------------------------------

    def image(self, image_id: int) -> dict:
        if 1 <= image_id <= len(self.images):
            return self.images[image_id - 1]
        raise ApiError(404, f"no image with id {image_id}")

    def _ann_path(self, image_id: int) -> Path:
        return self.store / (self.image(image_id)["file_name"] + ".json")

    def load_annotations(self, image_id: int) -> dict:
        path = self._ann_path(image_id)
        if not path.is_file():
            return {"version": 0, "annotations": []}
        return json.loads(path.read_text())

    def save_annotations(self, image_id: int, body: dict) -> dict:
        info = self.image(image_id)
        anns = body.get("annotations")
        if not isinstance(anns, list):
            raise ApiError(400, "body must carry an 'annotations' list")
        clean = []
        for a in anns:
            try:
                x, y, w, h = (float(v) for v in a["bbox"])
                cat = int(a["category_id"])
            except (TypeError, KeyError, ValueError):
                raise ApiError(400, "each annotation needs bbox [x,y,w,h] "
                                    "and category_id") from None
            if not (1 <= cat <= len(self.categories)):
                raise ApiError(400, f"category_id {cat} outside 1..."
                                    f"{len(self.categories)}")
            # the visible image extent is [-0.5, dim - 0.5] in pixel-center
            # coordinates; boxes must sit fully inside it
            eps = 1e-6
            if w <= 0 or h <= 0 or x < -0.5 - eps or y < -0.5 - eps \
                    or x + w > info["width"] - 0.5 + eps \
                    or y + h > info["height"] - 0.5 + eps:
                raise ApiError(400, f"bbox {[x, y, w, h]} outside image "
                                    f"bounds")
            clean.append({"bbox": [x, y, w, h], "category_id": cat})
        with self.lock:
            prev = self.load_annotations(image_id)["version"]
            doc = {"version": prev + 1, "annotations": clean}
            pipeline.atomic_write_text(self._ann_path(image_id),
                                       json.dumps(doc, sort_keys=True,
                                                  indent=2) + "\n")
        return {**doc, "previous_version": prev}

    def load_marks(self) -> dict:
        if not self.marks_path.is_file():
            return {"version": 0, "marks": []}
        return json.loads(self.marks_path.read_text())

    def save_marks(self, body: dict) -> dict:
        marks = body.get("marks")
        if not isinstance(marks, list):
            raise ApiError(400, "body must carry a 'marks' list")
        known = {im["file_name"]: im for im in self.images}
        clean = []
        for m in marks:
            try:
                entry = {"gcp": str(m["gcp"]), "image": str(m["image"]),
                         "col": float(m["col"]), "row": float(m["row"]),
                         "confirmed": bool(m.get("confirmed", False))}
            except (TypeError, KeyError, ValueError):
                raise ApiError(400, "each mark needs gcp, image, col, "
                                    "row") from None
            info = known.get(entry["image"])
            if info is None:
                raise ApiError(400, f"mark references unknown image "
                                    f"{entry['image']!r}")
            if not (-0.5 <= entry["col"] <= info["width"] - 0.5
                    and -0.5 <= entry["row"] <= info["height"] - 0.5):
                raise ApiError(400, "mark pixel outside image")
            clean.append(entry)
        with self.lock:
            prev = self.load_marks()["version"]
            doc = {"version": prev + 1, "marks": clean}
            pipeline.atomic_write_text(self.marks_path,
                                       json.dumps(doc, sort_keys=True,
                                                  indent=2) + "\n")
        return {**doc, "previous_version": prev}

    # -- derived views -----------------------------------------------------

    def candidates(self, gcp_name: str) -> dict:
        if self.gcps_path is None:
            raise ApiError(409, "no GCP table configured (serve.gcps)")
        gcps = {n: (w, e) for n, w, e
                in pipeline.read_gcp_world_csv(self.gcps_path)}
        if gcp_name not in gcps:
            raise ApiError(404, f"unknown GCP {gcp_name!r}")
        records, _ = gps_embed.scan_images(self.image_dir)
        positions = [(Path(r.image_path).name,
                      wgs84_to_utm(r.gps) if r.gps is not None else None)
                     for r in records]
        world, _elev = gcps[gcp_name]
        ranked = gcp_select.candidate_images(world, positions, self.radius)
        by_name = {im["file_name"]: im["id"] for im in self.images}
        return {"gcp": gcp_name, "radius_m": self.radius,
                "candidates": [{"image": n, "image_id": by_name.get(n),
                                "distance_m": d} for n, d in ranked]}

    def _projection_inputs(self):
        need = [k for k in ("reconstruction", "dsm", "ortho_world")
                if k not in self._proj_keys]
        if need:
            raise ApiError(409, "projection preview not configured; serve "
                                "section lacks " + ", ".join(need))
        if self._proj_cache is None:
            cameras, shots = read_reconstruction(
                self._proj_keys["reconstruction"])
            dsm = read_raster(self._proj_keys["dsm"])
            gt = read_world_file(self._proj_keys["ortho_world"])
            offset = (0.0, 0.0)
            if "geo_offset" in self._proj_keys:
                _, ox, oy = read_geo_offset(self._proj_keys["geo_offset"])
                offset = (ox, oy)
            manual = None
            if "manual_ortho" in self._proj_keys:
                loaded = coco.read_coco(self._proj_keys["manual_ortho"])
                anns = (loaded.annotations
                        if isinstance(loaded, coco.AnnotationSet)
                        else loaded.detections)
                manual = [a.bbox for a in anns]
            self._proj_cache = (cameras, shots, dsm, gt, offset, manual)
        return self._proj_cache

    def preview(self, image_id: int) -> dict:
        info = self.image(image_id)
        cameras, shots, dsm, gt, offset, manual = self._projection_inputs()
        anns = self.load_annotations(image_id)["annotations"]
        dets = coco.DetectionSet([
            coco.Detection(info["id"], a["category_id"],
                           coco.BBox(*a["bbox"]), 1.0) for a in anns])
        images = [coco.ImageInfo(info["id"], info["file_name"],
                                 info["width"], info["height"])]
        rows, _, _ = projector.project_batch(
            dets, images, cameras, shots, dsm, gt, offset=offset)
        projected = []
        for row in rows:
            r = row.result
            item = {"det_id": row.det_id, "status": r.status,
                    "src_bbox": [r.source_bbox.x, r.source_bbox.y,
                                 r.source_bbox.w, r.source_bbox.h]}
            if r.status == projector.STATUS_OK:
                item["world_bbox"] = list(r.world_bbox)
                item["ortho_bbox"] = [r.ortho_bbox.x, r.ortho_bbox.y,
                                      r.ortho_bbox.w, r.ortho_bbox.h]
            projected.append(item)
        out = {"image_id": image_id, "projected": projected}
        if manual is not None:
            out["manual"] = [[b.x, b.y, b.w, b.h] for b in manual]
            pairs = []
            for i, item in enumerate(projected):
                if "ortho_bbox" not in item:
                    continue
                pb = coco.BBox(*item["ortho_bbox"])
                best, best_j = 0.0, None
                for j, mb in enumerate(manual):
                    v = coco.iou(pb, mb)
                    if v > best:
                        best, best_j = v, j
                if best_j is not None:
                    pairs.append({"projected": i, "manual": best_j,
                                  "iou": best})
            out["pairs"] = pairs
        return out

    # -- exports -----------------------------------------------------------

    def _merged_annotation_set(self) -> coco.AnnotationSet:
        images, annotations = [], []
        next_id = 1
        for info in self.images:
            im = coco.ImageInfo(info["id"], info["file_name"],
                                info["width"], info["height"])
            images.append(im)
            for a in self.load_annotations(info["id"])["annotations"]:
                annotations.append(coco.Annotation(
                    next_id, info["id"], a["category_id"],
                    coco.BBox(*a["bbox"])))
                next_id += 1
        cats = [coco.Category(i, name)
                for i, name in enumerate(self.categories, start=1)]
        return coco.AnnotationSet(images, annotations, cats)

    def export(self, fmt: str) -> dict:
        self.export_dir.mkdir(parents=True, exist_ok=True)
        with self.lock:
            if fmt == "coco":
                aset = self._merged_annotation_set()
                path = self.export_dir / "annotations.json"
                coco.write_coco(aset, path)
                return {"written": [str(path)],
                        "annotations": len(aset.annotations)}
            if fmt == "yolo":
                aset = self._merged_annotation_set()
                ydir = self.export_dir / "yolo"
                ydir.mkdir(exist_ok=True)
                written = []
                for im in aset.images:
                    lines = coco.coco_to_yolo(aset, im)
                    path = ydir / (Path(im.file_name).stem + ".txt")
                    pipeline.atomic_write_text(
                        path, "".join(line + "\n" for line in lines))
                    written.append(str(path))
                return {"written": written}
            if fmt == "gcp_list":
                if self.gcps_path is None:
                    raise ApiError(409, "no GCP table configured "
                                        "(serve.gcps)")
                gcps = {n: (w, e) for n, w, e
                        in pipeline.read_gcp_world_csv(self.gcps_path)}
                entries = []
                for m in self.load_marks()["marks"]:
                    if not m["confirmed"]:
                        continue
                    if m["gcp"] not in gcps:
                        raise ApiError(409, f"mark references unknown GCP "
                                            f"{m['gcp']!r}")
                    world, elev = gcps[m["gcp"]]
                    entries.append(gcp_select.GcpEntry(
                        world, elev, m["col"], m["row"], m["image"]))
                if not entries:
                    raise ApiError(409, "no confirmed marks to export")
                w0 = entries[0].world
                path = self.export_dir / "gcp_list.txt"
                gcp_select.assemble_gcp_list(
                    entries, f"WGS84 UTM {w0.zone}{w0.hemisphere}", path)
                return {"written": [str(path)], "lines": len(entries)}
            raise ApiError(400, f"unknown export format {fmt!r}; use "
                                f"coco, yolo or gcp_list")


_IMG_FILE_RE = re.compile(r"^/api/v1/images/(\d+)/file$")
_IMG_ANN_RE = re.compile(r"^/api/v1/images/(\d+)/annotations$")

_FALLBACK_PAGE = (b"<!doctype html><title>orthotrace</title>"
                  b"<p>API is up. No UI bundle configured (serve.ui).</p>")


class _Handler(BaseHTTPRequestHandler):
    state: ProjectState  # injected by make_server

    # quiet by default; tests and the CLI don't want per-request noise
    def log_message(self, fmt, *args):
        pass

    def _json(self, status: int, payload) -> None:
        body = json.dumps(payload, sort_keys=True).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b""
        try:
            doc = json.loads(raw) if raw else {}
        except json.JSONDecodeError as exc:
            raise ApiError(400, f"request body is not JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ApiError(400, "request body must be a JSON object")
        return doc

    def _static(self, path: str) -> None:
        ui = self.state.ui_dir
        if path == "/":
            path = "/index.html"
        if ui is not None:
            target = (ui / path.lstrip("/")).resolve()
            if str(target).startswith(str(ui.resolve())) and target.is_file():
                ctype = {"html": "text/html", "js": "text/javascript",
                         "css": "text/css", "map": "application/json",
                         "svg": "image/svg+xml"}.get(
                    target.suffix.lstrip("."), "application/octet-stream")
                data = target.read_bytes()
                self.send_response(200)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)
                return
        if path == "/index.html":
            self.send_response(200)
            self.send_header("Content-Type", "text/html")
            self.send_header("Content-Length", str(len(_FALLBACK_PAGE)))
            self.end_headers()
            self.wfile.write(_FALLBACK_PAGE)
        else:
            self._json(404, {"error": f"no such path {path!r}"})

    def do_GET(self):  # noqa: N802 (http.server API)
        try:
            url = urlparse(self.path)
            q = parse_qs(url.query)
            if url.path == "/api/v1/project":
                return self._json(200, self.state.describe())
            if url.path == "/api/v1/images":
                st = self.state
                listing = [{**im, "annotations_version":
                            st.load_annotations(im["id"])["version"]}
                           for im in st.images]
                return self._json(200, listing)
            m = _IMG_FILE_RE.match(url.path)
            if m:
                info = self.state.image(int(m.group(1)))
                data = (self.state.image_dir / info["file_name"]).read_bytes()
                self.send_response(200)
                self.send_header("Content-Type", "image/jpeg")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)
                return
            m = _IMG_ANN_RE.match(url.path)
            if m:
                return self._json(200, self.state.load_annotations(
                    int(m.group(1))))
            if url.path == "/api/v1/gcps":
                return self._json(200, self.state.load_marks())
            if url.path == "/api/v1/gcps/candidates":
                if "gcp" not in q:
                    raise ApiError(400, "missing query parameter 'gcp'")
                return self._json(200, self.state.candidates(q["gcp"][0]))
            if url.path == "/api/v1/projection/preview":
                if "image" not in q:
                    raise ApiError(400, "missing query parameter 'image'")
                try:
                    image_id = int(q["image"][0])
                except ValueError:
                    raise ApiError(400, "'image' must be an integer id") \
                        from None
                return self._json(200, self.state.preview(image_id))
            if url.path.startswith("/api/"):
                raise ApiError(404, f"no such endpoint {url.path}")
            return self._static(url.path)
        except ApiError as exc:
            self._json(exc.status, {"error": str(exc)})
        except Exception as exc:  # pragma: no cover - defensive boundary
            self._json(500, {"error": f"{type(exc).__name__}: {exc}"})

    def do_POST(self):  # noqa: N802 (http.server API)
        try:
            url = urlparse(self.path)
            q = parse_qs(url.query)
            m = _IMG_ANN_RE.match(url.path)
            if m:
                body = self._read_body()
                return self._json(200, self.state.save_annotations(
                    int(m.group(1)), body))
            if url.path == "/api/v1/gcps":
                return self._json(200,
                                  self.state.save_marks(self._read_body()))
            if url.path == "/api/v1/export":
                if "format" not in q:
                    raise ApiError(400, "missing query parameter 'format'")
                return self._json(200, self.state.export(q["format"][0]))
            raise ApiError(404, f"no such endpoint {url.path}")
        except ApiError as exc:
            self._json(exc.status, {"error": str(exc)})
        except ValueError as exc:
            self._json(400, {"error": str(exc)})
        except Exception as exc:  # pragma: no cover - defensive boundary
            self._json(500, {"error": f"{type(exc).__name__}: {exc}"})


def make_server(config_path: str | Path, port: int = 0) \
        -> ThreadingHTTPServer:
    """Build the server without starting it; port 0 picks a free port."""
    state = ProjectState(config_path)
    handler = type("BoundHandler", (_Handler,), {"state": state})
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve(config_path: str | Path, port: int = 8764) -> None:
    httpd = make_server(config_path, port)
    host, bound = httpd.server_address[:2]
    print(f"serving on http://{host}:{bound}/ (Ctrl-C stops)")
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
