"""Live editing sessions: masks, fields, strokes, undo, and previews.

A session owns the editing state for one photograph. Every mutation
bumps a strictly increasing revision counter and pushes an undo snapshot
(depth 64). Field and color brushes repopulate the strokes inside the
touched disk so edits steer structure without redrawing each stroke.
Previews are cached by (checkpoint digest, revision), making them a pure
function of that pair.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass

import numpy as np

from hairstudio.config import RunConfig
from hairstudio.flowfield import (
    FieldBrush,
    OrientationField,
    brush_color,
    brush_field,
    minimum_change_field,
    smooth_color_field,
    structure_tensor,
)
from hairstudio.imagecore import MaskImage, RasterImage
from hairstudio.pipeline import PipelineState, synthesize_init, synthesize_with_timing
from hairstudio.strokes import GuideStroke, StrokeSet, extract_guide_strokes
from hairstudio.synthdata import load_manifest  # noqa: F401  (re-export convenience)

__all__ = ["Session", "SessionManager", "UNDO_DEPTH", "EDIT_OPS"]

UNDO_DEPTH = 64
EDIT_OPS = (
    "mask-brush",
    "stroke-add",
    "stroke-delete",
    "field-brush",
    "color-brush",
    "init-fill",
    "undo",
)


@dataclass
class _Snapshot:
    mask: np.ndarray
    direction: np.ndarray
    coherence: np.ndarray
    reliable: np.ndarray
    colorfield: np.ndarray
    strokes: tuple[GuideStroke, ...]


class Session:
    def __init__(self, image: RasterImage, cfg: RunConfig | None = None, seed: int = 0):
        self.id = uuid.uuid4().hex
        self.cfg = cfg or RunConfig()
        self.seed = seed
        self.image = image
        self.mask = MaskImage(np.zeros((image.height, image.width), dtype=np.uint8))
        f = self.cfg.field
        self.field = minimum_change_field(
            structure_tensor(image, f.sigma_grad, f.sigma_smooth), f.tau_coherence
        )
        self.colorfield = smooth_color_field(image, self.field, L=f.color_lic_halflen, h=f.lic_step)
        self.strokes = StrokeSet(strokes=(), extent=image.extent)
        self.revision = 0
        self._undo: list[_Snapshot] = []
        self._lock = threading.RLock()
        self._preview_cache: dict[tuple[str, int], tuple[RasterImage, dict]] = {}

    # -- undo machinery -------------------------------------------------------

    def _snapshot(self) -> _Snapshot:
        return _Snapshot(
            mask=self.mask.data.copy(),
            direction=self.field.direction.copy(),
            coherence=self.field.coherence.copy(),
            reliable=self.field.reliable.copy(),
            colorfield=self.colorfield.data.copy(),
            strokes=self.strokes.strokes,
        )

    def _push_undo(self):
        self._undo.append(self._snapshot())
        if len(self._undo) > UNDO_DEPTH:
            self._undo.pop(0)

    def _restore(self, snap: _Snapshot):
        self.mask = MaskImage(snap.mask)
        self.field = OrientationField(
            direction=snap.direction, coherence=snap.coherence, reliable=snap.reliable
        )
        self.colorfield = RasterImage(snap.colorfield)
        self.strokes = StrokeSet(strokes=snap.strokes, extent=self.image.extent)

    def _bump(self) -> int:
        self.revision += 1
        return self.revision

    # -- edits ----------------------------------------------------------------

    def apply_edit(self, op: str, payload: dict, pipeline: PipelineState | None = None) -> int:
        """Apply one edit operation; returns the new revision."""
        if op not in EDIT_OPS:
            raise ValueError(f"unknown edit op {op!r}")
        with self._lock:
            if op == "undo":
                if not self._undo:
                    raise ValueError("nothing to undo")
                self._restore(self._undo.pop())
                return self._bump()
            self._push_undo()
            try:
                getattr(self, "_edit_" + op.replace("-", "_"))(payload, pipeline)
            except Exception:
                self._restore(self._undo.pop())
                raise
            return self._bump()

    def _check_point(self, p):
        x, y = float(p[0]), float(p[1])
        if not (0 <= x <= self.image.width - 1 and 0 <= y <= self.image.height - 1):
            raise ValueError(f"point ({x}, {y}) lies outside the image")
        return x, y

    def _edit_mask_brush(self, payload: dict, _):
        path = [self._check_point(p) for p in payload["path"]]
        radius = float(payload["radius"])
        if radius <= 0:
            raise ValueError("brush radius must be positive")
        mode = payload.get("mode", "paint")
        if mode not in ("paint", "erase"):
            raise ValueError(f"unknown mask mode {mode!r}")
        m = self.mask.data.copy()
        ys, xs = np.mgrid[0 : self.image.height, 0 : self.image.width]
        for x, y in path:
            disk = np.hypot(xs - x, ys - y) <= radius
            m[disk] = 1 if mode == "paint" else 0
        self.mask = MaskImage(m)
        if mode == "erase":
            kept = tuple(s for s in self.strokes.strokes if self._stroke_in_mask(s))
            self.strokes = StrokeSet(strokes=kept, extent=self.image.extent)

    def _stroke_in_mask(self, stroke: GuideStroke) -> bool:
        xi = np.clip(np.round(stroke.points[:, 0]).astype(int), 0, self.image.width - 1)
        yi = np.clip(np.round(stroke.points[:, 1]).astype(int), 0, self.image.height - 1)
        return bool(self.mask.data[yi, xi].all())

    def _edit_stroke_add(self, payload: dict, _):
        pts = np.asarray([self._check_point(p) for p in payload["points"]], dtype=np.float64)
        color = tuple(float(c) for c in payload["color"])
        stroke = GuideStroke(points=pts, color=color, width=float(payload.get("width", self.cfg.strokes.width)))
        self.strokes = StrokeSet(strokes=self.strokes.strokes + (stroke,), extent=self.image.extent)

    def _edit_stroke_delete(self, payload: dict, _):
        strokes = list(self.strokes.strokes)
        if not strokes:
            raise ValueError("no strokes to delete")
        if "index" in payload:
            idx = int(payload["index"])
            if not -len(strokes) <= idx < len(strokes):
                raise ValueError(f"stroke index {idx} out of range")
        elif "near" in payload:
            x, y = self._check_point(payload["near"])
            dists = [np.hypot(s.points[:, 0] - x, s.points[:, 1] - y).min() for s in strokes]
            idx = int(np.argmin(dists))
        else:
            raise ValueError("stroke-delete needs 'index' or 'near'")
        strokes.pop(idx)
        self.strokes = StrokeSet(strokes=tuple(strokes), extent=self.image.extent)

    def _edit_field_brush(self, payload: dict, _):
        path = [self._check_point(p) for p in payload["path"]]
        radius = float(payload["radius"])
        angle = float(np.deg2rad(float(payload["angle_deg"])))
        intensity = float(payload.get("intensity", 1.0))
        field = self.field
        for x, y in path:
            field = brush_field(field, FieldBrush(center=(x, y), radius=radius, intensity=intensity, angle=angle))
        self.field = field
        self._repopulate(path, radius)

    def _edit_color_brush(self, payload: dict, _):
        path = [self._check_point(p) for p in payload["path"]]
        radius = float(payload["radius"])
        intensity = float(payload.get("intensity", 1.0))
        color = tuple(float(c) for c in payload["color"])
        cf = self.colorfield
        for x, y in path:
            cf = brush_color(cf, FieldBrush(center=(x, y), radius=radius, intensity=intensity, color=color))
        self.colorfield = cf
        self._repopulate(path, radius)

    def _edit_init_fill(self, payload: dict, pipeline: PipelineState | None):
        if pipeline is None:
            raise ValueError("init-fill needs a loaded checkpoint")
        if self.mask.is_empty():
            raise ValueError("mask is empty; paint a region first")
        color = tuple(float(c) for c in payload["mean_color"])
        result = synthesize_init(pipeline, self.image, self.mask, color)
        f = self.cfg.field
        self.field = minimum_change_field(
            structure_tensor(result, f.sigma_grad, f.sigma_smooth), f.tau_coherence
        )
        self.colorfield = smooth_color_field(result, self.field, L=f.color_lic_halflen, h=f.lic_step)
        try:
            self.strokes = extract_guide_strokes(
                result, self.mask, rng_seed=self.seed + self.revision,
                stroke_cfg=self.cfg.strokes, field_cfg=f,
                field=self.field, colorfield=self.colorfield,
            )
        except ValueError:
            self.strokes = StrokeSet(strokes=(), extent=self.image.extent)

    def _repopulate(self, path, radius: float):
        """Re-trace strokes around the brushed disks on the edited fields.

        Strokes touching a disk are dropped; replacements seed inside the
        disks and trace the full mask (so anything within brush radius +
        max stroke length can be rebuilt).
        """
        if self.mask.is_empty():
            return
        centers = np.asarray(path, dtype=np.float64)

        def touches(pts: np.ndarray) -> bool:
            return any(
                np.hypot(pts[:, 0] - cx, pts[:, 1] - cy).min() <= radius for cx, cy in centers
            )

        kept = tuple(s for s in self.strokes.strokes if not touches(s.points))
        ys, xs = np.mgrid[0 : self.image.height, 0 : self.image.width]
        zone = np.zeros((self.image.height, self.image.width), dtype=bool)
        for cx, cy in centers:
            zone |= np.hypot(xs - cx, ys - cy) <= radius
        zone &= self.mask.data.astype(bool)
        if not zone.any():
            self.strokes = StrokeSet(strokes=kept, extent=self.image.extent)
            return
        try:
            fresh = extract_guide_strokes(
                self.image, self.mask,
                rng_seed=self.seed + self.revision,
                stroke_cfg=self.cfg.strokes, field_cfg=self.cfg.field,
                field=self.field, colorfield=self.colorfield,
                seed_mask=MaskImage(zone.astype(np.uint8)),
            )
            new_strokes = fresh.strokes
        except ValueError:
            new_strokes = ()
        self.strokes = StrokeSet(strokes=kept + new_strokes, extent=self.image.extent)

    # -- preview ----------------------------------------------------------------

    def preview(self, pipeline: PipelineState | None) -> tuple[RasterImage, dict]:
        """Synthesize the current state; cached per (digest, revision)."""
        if pipeline is None:
            raise ValueError("no checkpoint loaded")
        if self.mask.is_empty():
            raise ValueError("mask is empty; nothing to preview")
        digest = getattr(pipeline, "checkpoint_digest", None) or pipeline.params_digest()
        key = (digest, self.revision)
        with self._lock:
            hit = self._preview_cache.get(key)
            if hit is not None:
                img, timings = hit
                return img, {**timings, "cached": True}
            mask, strokes = self.mask, self.strokes
        t0 = time.perf_counter()
        image, timings = synthesize_with_timing(pipeline, self.image, mask, strokes)
        timings = {**timings, "total_ms": (time.perf_counter() - t0) * 1e3, "cached": False}
        with self._lock:
            self._preview_cache[key] = (image, {k: v for k, v in timings.items() if k != "cached"})
            if len(self._preview_cache) > 8:
                self._preview_cache.pop(next(iter(self._preview_cache)))
        return image, timings


class SessionManager:
    def __init__(self, cfg: RunConfig | None = None):
        self.cfg = cfg or RunConfig()
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, image: RasterImage, seed: int = 0) -> Session:
        session = Session(image, self.cfg, seed=seed)
        with self._lock:
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            if session_id not in self._sessions:
                raise KeyError(f"unknown session {session_id!r}")
            return self._sessions[session_id]
