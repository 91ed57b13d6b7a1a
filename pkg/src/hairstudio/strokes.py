"""Guide strokes: seeding, field tracing, colorization, rasterization.

A guide stroke is a polyline with an RGBA color and a width. Strokes are
traced along the orientation field inside a mask, colored from a
flow-smoothed color field, and rasterized into the 4-channel RGBA image
the synthesis networks consume.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from hairstudio.config import FieldConfig, StrokeConfig
from hairstudio.flowfield import (
    OrientationField,
    _OrientationSampler,
    _bilinear,
    minimum_change_field,
    smooth_color_field,
    structure_tensor,
)
from hairstudio.imagecore import MaskImage, RasterImage, check_same_extent

__all__ = [
    "GuideStroke",
    "StrokeSet",
    "DegenerateStrokeError",
    "sample_seeds",
    "trace_stroke",
    "colorize_stroke",
    "rasterize_strokes",
    "extract_guide_strokes",
]

STROKESET_VERSION = 1


class DegenerateStrokeError(ValueError):
    """Tracing terminated immediately; no usable polyline."""


@dataclass(frozen=True)
class GuideStroke:
    """Polyline with RGBA color in [0, 1] and a width in pixels."""

    points: np.ndarray  # (n, 2) float, (x, y) pixel coordinates
    color: tuple[float, float, float, float]
    width: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("a stroke needs at least two (x, y) points")
        if not np.isfinite(pts).all():
            raise ValueError("stroke points must be finite")
        color = tuple(float(c) for c in self.color)
        if len(color) != 4 or any(not 0.0 <= c <= 1.0 for c in color):
            raise ValueError("color must be RGBA in [0, 1]")
        if not 0.0 < color[3] <= 1.0:
            raise ValueError("stroke alpha must lie in (0, 1]")
        if self.width <= 0:
            raise ValueError("stroke width must be positive")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "color", color)

    @property
    def alpha(self) -> float:
        return self.color[3]

    def length(self) -> float:
        return float(np.sum(np.hypot(*(np.diff(self.points, axis=0).T))))

    def segment_angles(self) -> np.ndarray:
        """Orientation (mod pi, radians in [0, pi)) of each segment."""
        d = np.diff(self.points, axis=0)
        return np.mod(np.arctan2(d[:, 1], d[:, 0]), np.pi)


@dataclass(frozen=True)
class StrokeSet:
    strokes: tuple[GuideStroke, ...]
    extent: tuple[int, int]  # (width, height)

    def __post_init__(self):
        strokes = tuple(self.strokes)
        w, h = self.extent
        # pixel centers sit on integers, so the image spans [-0.5, n-0.5]
        for s in strokes:
            x, y = s.points[:, 0], s.points[:, 1]
            if (x < -0.5).any() or (x > w - 0.5).any() or (y < -0.5).any() or (y > h - 0.5).any():
                raise ValueError("stroke points must lie within the extent")
        object.__setattr__(self, "strokes", strokes)
        object.__setattr__(self, "extent", (int(w), int(h)))

    def __len__(self) -> int:
        return len(self.strokes)

    @property
    def width(self) -> int:
        return self.extent[0]

    @property
    def height(self) -> int:
        return self.extent[1]

    def to_json(self) -> str:
        doc = {
            "version": STROKESET_VERSION,
            "extent": [self.extent[0], self.extent[1]],
            "strokes": [
                {
                    "points": [[round(float(x), 5), round(float(y), 5)] for x, y in s.points],
                    "color": [round(float(c), 6) for c in s.color],
                    "width": round(float(s.width), 5),
                }
                for s in self.strokes
            ],
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "StrokeSet":
        doc = json.loads(text)
        if doc.get("version") != STROKESET_VERSION:
            raise ValueError(f"unsupported stroke-set version {doc.get('version')}")
        strokes = tuple(
            GuideStroke(
                points=np.asarray(s["points"], dtype=np.float64),
                color=tuple(s["color"]),
                width=float(s["width"]),
            )
            for s in doc["strokes"]
        )
        return cls(strokes=strokes, extent=tuple(doc["extent"]))

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.to_json())
            f.write("\n")

    @classmethod
    def load(cls, path) -> "StrokeSet":
        with open(path) as f:
            return cls.from_json(f.read())


def sample_seeds(
    mask: MaskImage,
    density: float,
    rng_seed: int,
    min_dist: float | None = None,
    spacing_factor: float = 0.6,
) -> np.ndarray:
    """Poisson-disk-style seed positions inside the mask.

    Dart throwing over the masked pixels: candidates closer than
    ``min_dist`` to an accepted seed are rejected. Deterministic for a
    fixed ``rng_seed``; aims for density * |mask| / 1000 seeds.
    Returns an (n, 2) array of (x, y) coordinates.
    """
    if density <= 0:
        raise ValueError("density must be positive")
    coords = np.argwhere(mask.data > 0)  # (row, col) in row-major order
    if coords.shape[0] == 0:
        return np.zeros((0, 2), dtype=np.float64)
    target = max(1, int(round(density * coords.shape[0] / 1000.0)))
    if min_dist is None:
        min_dist = spacing_factor * np.sqrt(coords.shape[0] / target)
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    accepted: list[np.ndarray] = []
    attempts = 0
    max_attempts = 200 * target
    while len(accepted) < target and attempts < max_attempts:
        attempts += 1
        row, col = coords[rng.integers(coords.shape[0])]
        p = np.array([col, row], dtype=np.float64)
        if accepted:
            d = np.min(np.hypot(*(np.asarray(accepted) - p).T))
            if d < min_dist:
                continue
        accepted.append(p)
    return np.asarray(accepted, dtype=np.float64).reshape(-1, 2)


def _inside_mask(mask: MaskImage, p: np.ndarray) -> bool:
    x, y = int(round(p[0])), int(round(p[1]))
    if x < 0 or y < 0 or x >= mask.width or y >= mask.height:
        return False
    return bool(mask.data[y, x])


def _march(
    sampler: _OrientationSampler,
    mask: MaskImage,
    start: np.ndarray,
    initial: np.ndarray,
    max_len: float,
    h: float,
    tau: float,
) -> list[np.ndarray]:
    """One direction of a midpoint-rule walk along the field."""
    pts: list[np.ndarray] = []
    pos = start.astype(np.float64)
    prev = initial / np.linalg.norm(initial)
    traveled = 0.0
    while traveled < max_len:
        k1 = sampler.direction(np.array([pos[0]]), np.array([pos[1]]))[0]
        if float(np.dot(k1, prev)) < 0:
            k1 = -k1
        mid = pos + 0.5 * h * k1
        k2 = sampler.direction(np.array([mid[0]]), np.array([mid[1]]))[0]
        if float(np.dot(k2, k1)) < 0:
            k2 = -k2
        nxt = pos + h * k2
        if not _inside_mask(mask, nxt):
            break
        if float(sampler.coherence(np.array([nxt[0]]), np.array([nxt[1]]))[0]) < tau:
            break
        # self-proximity: loop closure against non-adjacent history
        if len(pts) > 5:
            back = np.asarray(pts[:-5])
            if np.min(np.hypot(*(back - nxt).T)) < 0.7 * h:
                break
        pts.append(nxt)
        traveled += h
        prev = k2
        pos = nxt
    return pts


def trace_stroke(
    field: OrientationField,
    seed,
    mask: MaskImage,
    max_len: float,
    h: float = 0.5,
    tau_coherence: float = 0.05,
    width: float = 2.0,
) -> GuideStroke:
    """Integrate the field bidirectionally from a seed into a polyline.

    Midpoint (second-order) stepping with a running sign; each direction
    stops on mask exit, low coherence, arc length >= max_len, or
    self-proximity. Raises DegenerateStrokeError if nothing usable grows.
    """
    seed = np.asarray(seed, dtype=np.float64)
    if not _inside_mask(mask, seed):
        raise ValueError(f"seed {tuple(seed)} lies outside the mask")
    if (field.height, field.width) != (mask.height, mask.width):
        raise ValueError("field and mask extents differ")
    sampler = _OrientationSampler(field)
    coh0 = float(sampler.coherence(np.array([seed[0]]), np.array([seed[1]]))[0])
    if coh0 < tau_coherence:
        raise DegenerateStrokeError(f"seed coherence {coh0:.4g} below threshold")
    d0 = sampler.direction(np.array([seed[0]]), np.array([seed[1]]))[0]
    fwd = _march(sampler, mask, seed, d0, max_len, h, tau_coherence)
    bwd = _march(sampler, mask, seed, -d0, max_len, h, tau_coherence)
    pts = list(reversed(bwd)) + [seed] + fwd
    if len(pts) < 2:
        raise DegenerateStrokeError("stroke terminated immediately in both directions")
    return GuideStroke(points=np.asarray(pts), color=(0.0, 0.0, 0.0, 1.0), width=width)


def colorize_stroke(stroke: GuideStroke, colorfield: RasterImage, alpha: float) -> GuideStroke:
    """Color a stroke by the mean bilinear sample of the color field along it."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    rgb = colorfield.rgb().astype(np.float64)
    samples = _bilinear(rgb, stroke.points[:, 0], stroke.points[:, 1])
    mean = samples.mean(axis=0)
    return GuideStroke(points=stroke.points, color=(*map(float, mean), float(alpha)), width=stroke.width)


def _stroke_coverage(stroke: GuideStroke, width_px: int, height_px: int) -> np.ndarray:
    """Anti-aliased coverage in [0, 1] for one stroke (max over segments)."""
    r = stroke.width / 2.0 + 0.5
    pts = stroke.points
    x0 = max(0, int(np.floor(pts[:, 0].min() - r - 1)))
    x1 = min(width_px - 1, int(np.ceil(pts[:, 0].max() + r + 1)))
    y0 = max(0, int(np.floor(pts[:, 1].min() - r - 1)))
    y1 = min(height_px - 1, int(np.ceil(pts[:, 1].max() + r + 1)))
    cov = np.zeros((height_px, width_px), dtype=np.float64)
    if x1 < x0 or y1 < y0:
        return cov
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1].astype(np.float64)
    dist = np.full(xs.shape, np.inf)
    for a, b in zip(pts[:-1], pts[1:]):
        ab = b - a
        denom = float(ab @ ab)
        if denom < 1e-12:
            d = np.hypot(xs - a[0], ys - a[1])
        else:
            t = np.clip(((xs - a[0]) * ab[0] + (ys - a[1]) * ab[1]) / denom, 0.0, 1.0)
            d = np.hypot(xs - (a[0] + t * ab[0]), ys - (a[1] + t * ab[1]))
        np.minimum(dist, d, out=dist)
    cov[y0 : y1 + 1, x0 : x1 + 1] = np.clip(stroke.width / 2.0 + 0.5 - dist, 0.0, 1.0)
    return cov


def rasterize_strokes(strokeset: StrokeSet, mask: MaskImage) -> RasterImage:
    """Render strokes to a straight-alpha RGBA image, clipped to the mask.

    Strokes composite in draw order (later over earlier) with
    premultiplied-over accumulation; pixels outside the mask are forced
    to (0, 0, 0, 0).
    """
    if strokeset.extent != (mask.width, mask.height):
        raise ValueError("stroke set and mask extents differ")
    h_px, w_px = mask.height, mask.width
    acc_rgb = np.zeros((h_px, w_px, 3), dtype=np.float64)
    acc_a = np.zeros((h_px, w_px), dtype=np.float64)
    for stroke in strokeset.strokes:
        src_a = _stroke_coverage(stroke, w_px, h_px) * stroke.alpha
        src_rgb = src_a[:, :, None] * np.asarray(stroke.color[:3])
        keep = 1.0 - src_a
        acc_rgb = src_rgb + keep[:, :, None] * acc_rgb
        acc_a = src_a + keep * acc_a
    inside = mask.data.astype(bool)
    acc_rgb[~inside] = 0.0
    acc_a[~inside] = 0.0
    straight = np.zeros((h_px, w_px, 4), dtype=np.float64)
    nz = acc_a > 1e-8
    straight[nz, :3] = acc_rgb[nz] / acc_a[nz, None]
    straight[:, :, 3] = acc_a
    return RasterImage(straight)


def extract_guide_strokes(
    img: RasterImage,
    mask: MaskImage,
    density: float | None = None,
    rng_seed: int = 0,
    stroke_cfg: StrokeConfig | None = None,
    field_cfg: FieldConfig | None = None,
    field: OrientationField | None = None,
    colorfield: RasterImage | None = None,
    seed_mask: MaskImage | None = None,
) -> StrokeSet:
    """Automatic annotation: trace and colorize strokes from the image.

    Pipeline: structure tensor -> minimum-change field -> seed sampling ->
    bidirectional tracing -> colorization against the LIC-smoothed image.
    Degenerate strokes (incoherent seeds) are skipped. Deterministic for a
    fixed ``rng_seed``. A precomputed ``field``/``colorfield`` may be
    passed to re-extract strokes after brush edits, and ``seed_mask``
    restricts where new strokes start (they still trace the full mask).
    """
    check_same_extent(img, mask, "image/mask")
    if mask.is_empty():
        raise ValueError("mask is empty; nothing to annotate")
    scfg = stroke_cfg or StrokeConfig()
    fcfg = field_cfg or FieldConfig()
    if density is None:
        density = scfg.density
    if field is None:
        field = minimum_change_field(
            structure_tensor(img, fcfg.sigma_grad, fcfg.sigma_smooth), fcfg.tau_coherence
        )
    if colorfield is None:
        colorfield = smooth_color_field(img, field, L=fcfg.color_lic_halflen, h=fcfg.lic_step)
    if seed_mask is None:
        seed_region = mask
    else:
        seed_region = MaskImage(mask.data & seed_mask.data)
    seeds = sample_seeds(seed_region, density, rng_seed, spacing_factor=scfg.spacing_factor)
    rng = np.random.Generator(np.random.PCG64(rng_seed + 1))
    strokes = []
    for seed in seeds:
        max_len = float(rng.uniform(scfg.min_len, scfg.max_len))
        try:
            stroke = trace_stroke(
                field, seed, mask, max_len, h=scfg.step,
                tau_coherence=fcfg.tau_coherence, width=scfg.width,
            )
        except DegenerateStrokeError:
            continue
        strokes.append(colorize_stroke(stroke, colorfield, scfg.alpha))
    return StrokeSet(strokes=tuple(strokes), extent=(mask.width, mask.height))
