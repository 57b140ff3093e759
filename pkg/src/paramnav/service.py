"""HTTP inspection service: browse directions, render shifted frames on
demand, and persist human annotations.

Rendering is pure and cacheable (an LRU of 256 frames keyed by direction,
magnitude quantized to 1e-3, and seed); annotation writes append one JSON
line per record under a lock, so a crashed write never leaves a torn line.
The service never mutates the model or direction checkpoints it serves.
"""

import csv
import io
import json
import threading
import time
from collections import OrderedDict
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .directions import DirectionSet, apply_direction
from .evaluation import StripSpec, latent_from_seed, render_strip
from .pngio import png_bytes

RENDER_CACHE_SIZE = 256
DEFAULT_RANGE = 1.0  # fallback T for uncalibrated direction sets


class AnnotationIn(BaseModel):
    direction_id: int
    label: str
    interpretable: bool
    quality: int = Field(ge=1, le=5)
    t_min: float
    t_max: float
    annotator: str = Field(min_length=1)


class AnnotationStore:
    """Append-only JSON-lines file; one lock serializes writers."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, record: dict) -> dict:
        line = json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n"
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line)
                f.flush()
        return record

    def records(self) -> list:
        if not self.path.exists():
            return []
        out = []
        with open(self.path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    out.append(json.loads(line))
        return out


def create_app(model, dirs: DirectionSet, annotations_path,
               ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="paramnav direction inspector")
    store = AnnotationStore(annotations_path)
    t_range = dirs.magnitude_range or DEFAULT_RANGE
    t_limit = 2.0 * t_range
    cache: OrderedDict = OrderedDict()
    cache_lock = threading.Lock()

    def render_cached(direction: int, t: float, seed: int) -> bytes:
        key = (direction, int(round(t * 1000.0)), seed)
        with cache_lock:
            if key in cache:
                cache.move_to_end(key)
                return cache[key]
        shifted = apply_direction(model, dirs, direction, key[1] / 1000.0)
        img = shifted.generate(latent_from_seed(seed, model.latent_dim))[0]
        data = png_bytes(img)
        with cache_lock:
            cache[key] = data
            if len(cache) > RENDER_CACHE_SIZE:
                cache.popitem(last=False)
        return data

    def check_direction(direction: int):
        if not 0 <= direction < dirs.count:
            raise HTTPException(status_code=404,
                                detail=f"unknown direction {direction}")

    @app.get("/api/meta")
    def meta():
        return {
            "direction_count": dirs.count,
            "layer": dirs.layer,
            "parametrization": dirs.parametrization,
            "method": dirs.method,
            "magnitude_range": t_range,
            "t_limit": t_limit,
            "model": model.meta if hasattr(model, "meta") else {},
        }

    @app.get("/api/directions")
    def list_directions():
        return dirs.describe()

    @app.get("/api/render")
    def render(dir: int = Query(...), t: float = Query(...), seed: int = Query(0)):
        check_direction(dir)
        if not np.isfinite(t) or abs(t) > t_limit:
            raise HTTPException(status_code=400,
                                detail=f"magnitude {t} outside [-{t_limit}, {t_limit}]")
        return Response(render_cached(dir, t, seed), media_type="image/png")

    @app.get("/api/strip")
    def strip(dir: int = Query(...), seed: int = Query(0),
              steps: int = Query(7), tmax: float = Query(None)):
        check_direction(dir)
        tmax = t_range if tmax is None else tmax
        if not np.isfinite(tmax) or abs(tmax) > t_limit:
            raise HTTPException(status_code=400, detail=f"tmax {tmax} outside range")
        if steps % 2 == 0:
            steps += 1  # keep t = 0 in the grid
        try:
            spec = StripSpec(direction=dir, t_max=tmax, steps=steps, seeds=(seed,))
        except ValueError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        grid_img, _ = render_strip(model, dirs, spec)
        return Response(png_bytes(grid_img), media_type="image/png")

    @app.post("/api/annotations", status_code=201)
    def submit_annotation(ann: AnnotationIn):
        if not 0 <= ann.direction_id < dirs.count:
            raise HTTPException(status_code=422, detail=[{
                "loc": ["body", "direction_id"],
                "msg": f"direction {ann.direction_id} not in the loaded set",
                "type": "value_error"}])
        record = ann.model_dump()
        record["method"] = dirs.method
        record["timestamp"] = time.time()
        return store.append(record)

    @app.get("/api/annotations")
    def list_annotations():
        return store.records()

    @app.get("/api/annotations/export")
    def export_annotations(format: str = Query("csv")):
        if format != "csv":
            raise HTTPException(status_code=400, detail=f"unsupported format {format!r}")
        fields = ["method", "direction_id", "label", "interpretable", "quality",
                  "t_min", "t_max", "annotator", "timestamp"]
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore",
                                lineterminator="\n")
        writer.writeheader()
        for rec in sorted(store.records(),
                          key=lambda r: (r.get("method", ""), r.get("direction_id", 0))):
            writer.writerow(rec)
        return PlainTextResponse(buf.getvalue(), media_type="text/csv")

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:
        @app.get("/")
        def index():
            return JSONResponse({"service": "paramnav direction inspector",
                                 "ui": "not built; API under /api/"})

    return app


def serve(model, dirs, annotations_path, port: int = 7860, ui_dir=None):
    import uvicorn

    app = create_app(model, dirs, annotations_path, ui_dir)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
