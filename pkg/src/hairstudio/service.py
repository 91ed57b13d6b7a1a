"""Local HTTP + JSON editing service.

Endpoints (images travel as base64 PNG inside JSON bodies):

    GET  /healthz                      -> {status, checkpoint}
    POST /sessions                     {image_png_b64, seed?}
                                       -> {session_id, revision, width, height}
    POST /sessions/{id}/edits          {op, payload}        -> {revision}
    GET  /sessions/{id}/preview        -> {image_png_b64, revision, timings, cached}
    GET  /sessions/{id}/state          -> {revision, width, height,
                                           mask_png_b64, strokes_json}

Edit ops and payloads:

    mask-brush    {path: [[x,y],...], radius, mode: "paint"|"erase"}
    stroke-add    {points: [[x,y],...], color: [r,g,b,a], width}
    stroke-delete {index} | {near: [x,y]}
    field-brush   {path, radius, intensity, angle_deg}
    color-brush   {path, radius, intensity, color: [r,g,b]}
    init-fill     {mean_color: [r,g,b]}
    undo          {}
"""

from __future__ import annotations

import base64
import io
import time

import numpy as np
from fastapi import FastAPI, HTTPException
from PIL import Image
from pydantic import BaseModel, Field

from hairstudio.config import RunConfig
from hairstudio.imagecore import MaskImage, RasterImage
from hairstudio.pipeline import PipelineState
from hairstudio.session import EDIT_OPS, SessionManager

__all__ = ["create_app", "png_b64", "raster_from_png_b64"]


def png_b64(img: RasterImage | MaskImage) -> str:
    buf = io.BytesIO()
    if isinstance(img, MaskImage):
        Image.fromarray(img.data * np.uint8(255), mode="L").save(buf, format="PNG")
    else:
        arr = np.round(img.data * 255.0).astype(np.uint8)
        mode = {1: "L", 3: "RGB", 4: "RGBA"}[arr.shape[2]]
        pil = Image.fromarray(arr[:, :, 0] if mode == "L" else arr, mode=mode)
        pil.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode()


def raster_from_png_b64(data: str) -> RasterImage:
    try:
        raw = base64.b64decode(data, validate=True)
        with Image.open(io.BytesIO(raw)) as im:
            if im.mode not in ("L", "RGB", "RGBA"):
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float32) / 255.0
    except Exception as exc:
        raise ValueError(f"could not decode PNG payload: {exc}") from None
    return RasterImage(arr)


class CreateSessionBody(BaseModel):
    image_png_b64: str
    seed: int = 0


class EditBody(BaseModel):
    op: str = Field(description=f"one of {EDIT_OPS}")
    payload: dict = Field(default_factory=dict)


def create_app(
    checkpoint_path=None,
    pipeline: PipelineState | None = None,
    cfg: RunConfig | None = None,
) -> FastAPI:
    """Build the service app; a checkpoint enables preview and init-fill."""
    if pipeline is None and checkpoint_path is not None:
        pipeline = PipelineState.load(checkpoint_path)
    manager = SessionManager(cfg or (pipeline.cfg if pipeline else None))
    app = FastAPI(title="hairstudio", version="0.1.0")
    app.state.pipeline = pipeline
    app.state.sessions = manager

    def _session(session_id: str):
        try:
            return manager.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")

    @app.get("/healthz")
    def healthz():
        p = app.state.pipeline
        digest = None
        if p is not None:
            digest = getattr(p, "checkpoint_digest", None) or p.params_digest()
        return {"status": "ok", "checkpoint": digest}

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        try:
            image = raster_from_png_b64(body.image_png_b64)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        session = manager.create(image, seed=body.seed)
        return {
            "session_id": session.id,
            "revision": session.revision,
            "width": image.width,
            "height": image.height,
        }

    @app.post("/sessions/{session_id}/edits")
    def apply_edit(session_id: str, body: EditBody):
        session = _session(session_id)
        try:
            revision = session.apply_edit(body.op, body.payload, app.state.pipeline)
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"revision": revision}

    @app.get("/sessions/{session_id}/preview")
    def preview(session_id: str):
        session = _session(session_id)
        t0 = time.perf_counter()
        try:
            image, timings = session.preview(app.state.pipeline)
        except ValueError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {
            "image_png_b64": png_b64(image),
            "revision": session.revision,
            "timings": {
                "stage1_ms": timings["stage1_ms"],
                "stage2_ms": timings["stage2_ms"],
                "total_ms": timings.get("total_ms", (time.perf_counter() - t0) * 1e3),
            },
            "cached": bool(timings.get("cached", False)),
        }

    @app.get("/sessions/{session_id}/state")
    def state(session_id: str):
        session = _session(session_id)
        return {
            "revision": session.revision,
            "width": session.image.width,
            "height": session.image.height,
            "mask_png_b64": png_b64(session.mask),
            "strokes_json": session.strokes.to_json(),
        }

    return app
