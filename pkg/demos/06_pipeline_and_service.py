"""Project pipeline walkthrough: describe a processing chain in one YAML
file, run it to get per-stage manifests with input/output hashes, prove a
re-run is byte-identical, then start the review service and drive its
HTTP interface.

    python3 demos/06_pipeline_and_service.py
"""

import hashlib
import http.client
import json
import math
import tempfile
import threading
from pathlib import Path

import numpy as np
from PIL import Image

from orthotrace.formats import coco
from orthotrace.geodesy import AffineGeotransform, write_world_file
from orthotrace.pipeline import run_pipeline
from orthotrace.raster import RasterGrid, write_raster
from orthotrace.server import make_server

root = Path(tempfile.mkdtemp(prefix="project_"))
print(f"project root {root}\n")

# ---------------------------------------------------------------------------
# The inputs: six nadir frames on two flight lines over flat ground, a
# coarse DSM, the orthomosaic's world file, and one detection per frame.
# ---------------------------------------------------------------------------

shots = {}
for j, cy in enumerate((10.0, 30.0)):
    for i, cx in enumerate((10.0, 30.0, 50.0)):
        shots[f"s{j}{i}.jpg"] = {"camera": "cam",
                                 "rotation": [math.pi, 0.0, 0.0],
                                 "translation": [-cx, cy, 30.0]}
(root / "reconstruction.json").write_text(json.dumps(
    [{"cameras": {"cam": {"projection_type": "perspective", "width": 100,
                          "height": 100, "focal": 1.0}},
      "shots": shots}]))
write_raster(RasterGrid(40, 30, AffineGeotransform(-10.0, 50.0, 2.0, -2.0),
                        np.zeros((30, 40))), root / "dsm.asc")
write_world_file(AffineGeotransform(-10.0, 50.0, 0.1, -0.1),
                 root / "ortho.wld")

frames = root / "frames"
frames.mkdir()
images = []
for k, name in enumerate(sorted(shots)):
    Image.new("RGB", (100, 100), (70, 110, 60)).save(frames / name)
    images.append(coco.ImageInfo(k + 1, name, 100, 100))
coco.write_coco(coco.AnnotationSet(images, [], [coco.Category(1, "plant")]),
                root / "images.json")
coco.write_coco(coco.DetectionSet(
    [coco.Detection(im.id, 1, coco.BBox(45, 45, 10, 10), 0.9)
     for im in images]), root / "detections.json")

(root / "project.yaml").write_text("""\
output:
  dir: out
pipeline: [select-min, project, traits]
select-min:
  reconstruction: reconstruction.json
  dsm: dsm.asc
project:
  detections: detections.json
  images: images.json
  reconstruction: reconstruction.json
  dsm: dsm.asc
  ortho_world: ortho.wld
traits:
  boxes: out/projected_merged.csv
  raster: dsm.asc
  stats: [mean, count]
serve:
  images: frames
  reconstruction: reconstruction.json
  dsm: dsm.asc
  ortho_world: ortho.wld
  categories: [plant]
""")

# ---------------------------------------------------------------------------
# Run it. Every stage leaves a manifest: the parameters it ran with
# (defaults filled in), the sha256 of every input and output, and a
# summary. Timings go to out/run_log.txt, never into manifests, so a
# re-run of unchanged inputs reproduces every byte.
# ---------------------------------------------------------------------------

run_pipeline(root / "project.yaml")
manifest = json.loads((root / "out/manifests/project.json").read_text())
print(f"stage {manifest['stage']}: summary {manifest['summary']}")
print(f"  {len(manifest['inputs'])} hashed inputs, "
      f"{len(manifest['outputs'])} hashed outputs")
print(f"  nms_iou parameter recorded as {manifest['parameters']['nms_iou']}")

def digest(out_dir):
    h = hashlib.sha256()
    for p in sorted(out_dir.rglob("*")):
        if p.is_file() and p.name != "run_log.txt":
            h.update(p.relative_to(out_dir).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()

first = digest(root / "out")
run_pipeline(root / "project.yaml")
print(f"re-run byte-identical: {digest(root / 'out') == first}\n")

# ---------------------------------------------------------------------------
# The review service. It exposes the frames, their annotation documents
# (versioned, last-write-wins), ground-control marking, dataset export,
# and a projection preview that georeferences the saved boxes on demand.
# ---------------------------------------------------------------------------

server = make_server(root / "project.yaml", port=0)
thread = threading.Thread(target=server.serve_forever, daemon=True)
thread.start()
host, port = server.server_address


def call(method, path, body=None):
    conn = http.client.HTTPConnection(host, port, timeout=10)
    payload = None if body is None else json.dumps(body).encode()
    headers = {} if payload is None else {"Content-Type": "application/json"}
    conn.request(method, path, body=payload, headers=headers)
    resp = conn.getresponse()
    data = json.loads(resp.read().decode())
    conn.close()
    return resp.status, data


status, listing = call("GET", "/api/v1/images")
print(f"GET /api/v1/images -> {status}, {len(listing)} frames, first: "
      f"{listing[0]['file_name']} {listing[0]['width']}x{listing[0]['height']}")

status, saved = call("POST", "/api/v1/images/1/annotations",
                     {"annotations": [{"bbox": [45.0, 45.0, 10.0, 10.0],
                                       "category_id": 1}]})
print(f"POST annotations -> {status}, version {saved['version']} "
      f"(was {saved['previous_version']})")

status, preview = call("GET", "/api/v1/projection/preview?image=1")
box = preview["projected"][0]
print(f"GET projection/preview -> {status}, saved box lands on ortho "
      f"pixels {box['ortho_bbox']} [{box['status']}]")

server.shutdown()
thread.join()
print("service stopped")
