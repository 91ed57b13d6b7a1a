"""Procedural fiber-image dataset: rendering, manifests, ingestion.

Replaces a 3-D hair-render farm with 2-D curved-fiber drawings that keep
the same parameter axes: 50 region styles x 4 lengths x 8 palettes x 19
yaw steps (30,400 grid cells). Yaw is modeled as horizontal shear plus
foreshortening of a left-right symmetric template, so opposite yaw signs
render as exact mirrors. Every sample is reproducible bit-for-bit from
its manifest row.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hairstudio.config import PALETTES, FieldConfig, StrokeConfig
from hairstudio.imagecore import MaskImage, RasterImage, dilate, load_image, load_mask, save_image, save_mask
from hairstudio.strokes import extract_guide_strokes

__all__ = [
    "StyleParams",
    "RenderError",
    "GRID_SHAPE",
    "GRID_SIZE",
    "YAW_DEGREES",
    "enumerate_style_grid",
    "style_traits",
    "fiber_curves",
    "render_background",
    "render_sample",
    "generate_dataset",
    "ingest_real",
    "load_manifest",
]

N_STYLES = 50
N_LENGTHS = 4
N_PALETTES = 8
YAW_DEGREES = tuple(range(-90, 91, 10))  # 19 viewpoints
GRID_SHAPE = (N_STYLES, N_LENGTHS, N_PALETTES, len(YAW_DEGREES))
GRID_SIZE = N_STYLES * N_LENGTHS * N_PALETTES * len(YAW_DEGREES)

_LENGTH_TABLE = (8.0, 13.0, 19.0, 27.0)  # base fiber length per level, px at size 64
_STYLE_SALT = 0x51F0
_SEED_MOD = 2**31 - 1


class RenderError(ValueError):
    """Parameters cannot produce a usable sample (e.g. empty mask)."""


@dataclass(frozen=True)
class StyleParams:
    style_id: int
    length_level: int
    palette_id: int
    yaw_deg: int
    density: float  # fibers per px^2 of region area
    curliness: float
    rng_seed: int

    def __post_init__(self):
        if not 0 <= self.style_id < N_STYLES:
            raise ValueError(f"style_id out of range: {self.style_id}")
        if not 0 <= self.length_level < N_LENGTHS:
            raise ValueError(f"length_level out of range: {self.length_level}")
        if not 0 <= self.palette_id < N_PALETTES:
            raise ValueError(f"palette_id out of range: {self.palette_id}")
        if self.yaw_deg not in YAW_DEGREES:
            raise ValueError(f"yaw_deg must be one of {YAW_DEGREES}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "StyleParams":
        return cls(**d)


def style_traits(style_id: int) -> dict:
    """Deterministic per-style region template, flow, and fiber statistics."""
    rng = np.random.Generator(np.random.PCG64(_STYLE_SALT + style_id))
    jaw_cy = rng.uniform(0.56, 0.70)
    jaw_rx = rng.uniform(0.26, 0.40)
    jaw_ry = rng.uniform(0.16, 0.28)
    goatee = rng.random() < 0.3
    if goatee:
        jaw_rx *= rng.uniform(0.4, 0.55)
    mouth_ry = jaw_ry * rng.uniform(0.30, 0.45)
    mustache = rng.random() < 0.7
    must_cy = jaw_cy - jaw_ry * rng.uniform(0.55, 0.75)
    must_rx = rng.uniform(0.13, 0.21)
    must_ry = rng.uniform(0.045, 0.075)
    return {
        "jaw": (0.5, jaw_cy, jaw_rx, jaw_ry),
        "mouth": (0.5, jaw_cy - jaw_ry * 0.55, jaw_rx * 0.42, mouth_ry),
        "mustache": (0.5, must_cy, must_rx, must_ry) if mustache else None,
        "splay_deg": rng.uniform(20.0, 55.0),
        "density": rng.uniform(0.05, 0.14),
        "curliness": rng.uniform(0.0, 1.0),
        "width": rng.uniform(1.1, 1.6),
    }


def _region_inside(traits: dict, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    def in_ellipse(spec, u, v):
        cx, cy, rx, ry = spec
        return ((u - cx) / rx) ** 2 + ((v - cy) / ry) ** 2 <= 1.0

    inside = in_ellipse(traits["jaw"], u, v) & ~in_ellipse(traits["mouth"], u, v)
    if traits["mustache"] is not None:
        inside |= in_ellipse(traits["mustache"], u, v)
    return inside


def _sample_seed(master_seed: int, index: int) -> int:
    return (master_seed * 1_000_003 + index * 7_919 + 17) % _SEED_MOD


def enumerate_style_grid(master_seed: int = 0) -> list[StyleParams]:
    """The full 50 x 4 x 8 x 19 parameter grid, one cell each."""
    grid: list[StyleParams] = []
    index = 0
    for style_id in range(N_STYLES):
        traits = style_traits(style_id)
        for length_level in range(N_LENGTHS):
            for palette_id in range(N_PALETTES):
                for yaw in YAW_DEGREES:
                    grid.append(
                        StyleParams(
                            style_id=style_id,
                            length_level=length_level,
                            palette_id=palette_id,
                            yaw_deg=yaw,
                            density=round(traits["density"], 6),
                            curliness=round(traits["curliness"], 6),
                            rng_seed=_sample_seed(master_seed, index),
                        )
                    )
                    index += 1
    return grid


def _yaw_transform(size: int, yaw_deg: int):
    """Map template pixel coords under |yaw| shear + foreshortening."""
    a = np.deg2rad(abs(yaw_deg))
    wscale = 0.45 + 0.55 * np.cos(a)
    shear = 0.35 * np.sin(a)
    cx = cy = (size - 1) / 2.0

    def apply(pts: np.ndarray) -> np.ndarray:
        out = pts.astype(np.float64).copy()
        out[:, 0] = cx + (pts[:, 0] - cx) * wscale + shear * (pts[:, 1] - cy)
        return out

    return apply


def fiber_curves(params: StyleParams, size: int = 64):
    """Fiber polylines (post-yaw), colors, widths, and alphas for a sample.

    Geometry is generated for |yaw| and mirrored afterwards when yaw is
    negative, so opposite signs are exact mirrors.
    """
    if size < 32:
        raise ValueError("size must be >= 32")
    if params.density <= 0:
        raise RenderError("zero fiber density renders an empty mask")
    rng = np.random.Generator(np.random.PCG64(params.rng_seed))
    traits = style_traits(params.style_id)
    # deterministic region-area estimate on a coarse grid
    gv, gu = np.mgrid[0:64, 0:64] / 63.0
    frac = _region_inside(traits, gu, gv).mean()
    n_fibers = int(round(params.density * frac * size * size))
    if n_fibers < 1:
        raise RenderError("zero fiber density renders an empty mask")
    scale = size / 64.0
    base_len = _LENGTH_TABLE[params.length_level] * scale
    splay = np.deg2rad(traits["splay_deg"])
    transform = _yaw_transform(size, params.yaw_deg)
    palette = np.asarray(PALETTES[params.palette_id][1])
    curves = []
    attempts = 0
    while len(curves) < n_fibers and attempts < 40 * n_fibers:
        attempts += 1
        u, v = rng.uniform(0.0, 1.0, size=2)
        if not _region_inside(traits, np.asarray(u), np.asarray(v)):
            continue
        root = np.array([u, v]) * (size - 1)
        theta = np.pi / 2 + splay * (u - 0.5) * 2 + rng.normal(0.0, 0.12)
        d = np.array([np.cos(theta), np.sin(theta)])
        perp = np.array([-d[1], d[0]])
        length = base_len * rng.uniform(0.75, 1.25)
        bend = params.curliness * length * rng.uniform(-0.45, 0.45)
        p0 = root
        p1 = root + 0.5 * length * d + bend * perp
        p2 = root + length * d + 0.35 * bend * perp * rng.uniform(-1, 1)
        ts = np.linspace(0.0, 1.0, 17)[:, None]
        pts = (1 - ts) ** 2 * p0 + 2 * ts * (1 - ts) * p1 + ts**2 * p2
        pts = transform(pts)
        keep = (
            (pts[:, 0] >= 1) & (pts[:, 0] <= size - 2)
            & (pts[:, 1] >= 1) & (pts[:, 1] <= size - 2)
        )
        pts = pts[keep]
        lightness = rng.uniform(0.75, 1.3)
        color = np.clip(palette * lightness + rng.normal(0.0, 0.02, 3), 0.0, 1.0)
        width = max(0.9, traits["width"] + rng.normal(0.0, 0.12))
        alpha = rng.uniform(0.85, 1.0)
        if len(pts) < 2:
            continue
        curves.append((pts, color, width, alpha))
    if not curves:
        raise RenderError("no fibers landed inside the image; mask would be empty")
    if params.yaw_deg < 0:
        curves = [((np.stack([(size - 1) - p[:, 0], p[:, 1]], axis=1)), c, w, a) for p, c, w, a in curves]
    return curves


def render_background(params: StyleParams, size: int = 64, domain: str = "synthetic") -> np.ndarray:
    """Skin-toned gradient backdrop (no fibers), as an (h, w, 3) array."""
    rng = np.random.Generator(np.random.PCG64(params.rng_seed ^ 0xBA5E))
    if domain == "synthetic":
        base = np.array([0.78, 0.60, 0.50]) + rng.normal(0.0, 0.03, 3)
        shade = 0.16
    elif domain == "real-proxy":
        # shifted statistics: cooler, darker skin and stronger vignette
        base = np.array([0.58, 0.46, 0.42]) + rng.normal(0.0, 0.05, 3)
        shade = 0.30
    else:
        raise ValueError(f"unknown domain {domain!r}")
    ys, xs = np.mgrid[0:size, 0:size] / (size - 1)
    vert = 1.0 - shade * ys
    vignette = 1.0 - 0.25 * ((xs - 0.5) ** 2 + (ys - 0.55) ** 2)
    img = base.reshape(1, 1, 3) * (vert * vignette)[:, :, None]
    return np.clip(img, 0.0, 1.0)


def _segment_distance_field(pts: np.ndarray, xs, ys) -> np.ndarray:
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
    return dist


def render_sample(params: StyleParams, size: int = 64, domain: str = "synthetic"):
    """Render one sample; returns (RasterImage RGB, MaskImage).

    Curved fibers composite over the backdrop with a soft occlusion halo;
    the mask is the union of fiber footprints grown by one pixel.
    """
    curves = fiber_curves(params, size)
    bg = render_background(params, size, domain)
    shadow = np.zeros((size, size), dtype=np.float64)
    rgb = bg.copy()
    alpha_acc = np.zeros((size, size), dtype=np.float64)
    color_acc = np.zeros((size, size, 3), dtype=np.float64)
    footprint = np.zeros((size, size), dtype=np.float64)
    for pts, color, width, alpha in curves:
        r = width / 2.0 + 3.0
        x0 = max(0, int(np.floor(pts[:, 0].min() - r)))
        x1 = min(size - 1, int(np.ceil(pts[:, 0].max() + r)))
        y0 = max(0, int(np.floor(pts[:, 1].min() - r)))
        y1 = min(size - 1, int(np.ceil(pts[:, 1].max() + r)))
        ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1].astype(np.float64)
        dist = _segment_distance_field(pts, xs, ys)
        cov = np.clip(width / 2.0 + 0.5 - dist, 0.0, 1.0)
        halo = np.clip((width / 2.0 + 2.5 - dist) / 2.5, 0.0, 1.0)
        box = (slice(y0, y1 + 1), slice(x0, x1 + 1))
        np.maximum(shadow[box], halo, out=shadow[box])
        np.maximum(footprint[box], cov, out=footprint[box])
        src_a = cov * alpha
        color_acc[box] = src_a[:, :, None] * color + (1 - src_a)[:, :, None] * color_acc[box]
        alpha_acc[box] = src_a + (1 - src_a) * alpha_acc[box]
    rgb = rgb * (1.0 - 0.30 * shadow[:, :, None])
    out = color_acc + (1 - alpha_acc)[:, :, None] * rgb
    mask = MaskImage((footprint >= 0.25).astype(np.uint8))
    if mask.is_empty():
        raise RenderError("fiber footprints rounded to an empty mask")
    mask = dilate(mask, 3)
    return RasterImage(np.clip(out, 0.0, 1.0)), mask


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _assign_splits(n: int, rng: np.random.Generator) -> list[str]:
    n_val = max(1, int(round(0.05 * n))) if n >= 3 else 0
    n_test = max(1, int(round(0.05 * n))) if n >= 3 else 0
    order = rng.permutation(n)
    splits = ["train"] * n
    for i in order[:n_val]:
        splits[i] = "val"
    for i in order[n_val : n_val + n_test]:
        splits[i] = "test"
    return splits


def generate_dataset(
    count: int,
    size: int,
    rng_seed: int,
    out_dir,
    domain: str = "synthetic",
    stroke_cfg: StrokeConfig | None = None,
    field_cfg: FieldConfig | None = None,
) -> Path:
    """Render ``count`` grid samples, auto-annotate, and write a manifest.

    ``count == 30400`` enumerates the full grid exactly once; smaller
    counts draw distinct cells deterministically from ``rng_seed``.
    Returns the manifest path (JSON lines).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if count > GRID_SIZE:
        raise ValueError(f"count exceeds the {GRID_SIZE}-cell parameter grid")
    out = Path(out_dir)
    for sub in ("images", "masks", "strokes"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    grid = enumerate_style_grid(rng_seed)
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    if count == GRID_SIZE:
        chosen = np.arange(GRID_SIZE)
    else:
        chosen = np.sort(rng.choice(GRID_SIZE, size=count, replace=False))
    splits = _assign_splits(count, rng)
    manifest_path = out / "manifest.jsonl"
    with open(manifest_path, "w") as mf:
        for i, gi in enumerate(chosen):
            params = grid[int(gi)]
            image, mask = render_sample(params, size, domain)
            # annotate the 8-bit image exactly as it will live on disk
            image = RasterImage(np.round(image.data * 255.0) / 255.0)
            strokes = extract_guide_strokes(
                image, mask, rng_seed=params.rng_seed, stroke_cfg=stroke_cfg, field_cfg=field_cfg
            )
            rel = {
                "image": f"images/{i:05d}.png",
                "mask": f"masks/{i:05d}.png",
                "strokes": f"strokes/{i:05d}.json",
            }
            save_image(image, out / rel["image"])
            save_mask(mask, out / rel["mask"])
            strokes.save(out / rel["strokes"])
            row = {
                "index": i,
                "grid_index": int(gi),
                "size": size,
                "domain": domain,
                "split": splits[i],
                "params": params.to_dict(),
                **rel,
                "sha256": {k: _sha256_file(out / v) for k, v in rel.items()},
            }
            mf.write(json.dumps(row, sort_keys=True))
            mf.write("\n")
    return manifest_path


def ingest_real(src_dir, out_dir, stroke_cfg: StrokeConfig | None = None, rng_seed: int = 0):
    """Ingest (image, mask) PNG pairs named ``<name>.png`` / ``<name>_mask.png``.

    Validates extents, auto-annotates strokes, and writes a manifest with
    domain=real. Bad pairs are skipped and reported, not fatal. Returns
    (manifest_path, errors).
    """
    src = Path(src_dir)
    out = Path(out_dir)
    (out / "strokes").mkdir(parents=True, exist_ok=True)
    errors: list[str] = []
    rows = []
    images = sorted(p for p in src.glob("*.png") if not p.stem.endswith("_mask"))
    for i, img_path in enumerate(images):
        mask_path = img_path.with_name(f"{img_path.stem}_mask.png")
        if not mask_path.exists():
            errors.append(f"{img_path.name}: missing mask {mask_path.name}")
            continue
        try:
            image = load_image(img_path)
            mask = load_mask(mask_path)
            if image.extent != mask.extent:
                raise ValueError(f"extent mismatch {image.extent} vs {mask.extent}")
            if mask.is_empty():
                raise ValueError("mask is empty")
            strokes = extract_guide_strokes(
                image, mask, rng_seed=_sample_seed(rng_seed, i), stroke_cfg=stroke_cfg
            )
        except Exception as exc:  # per-file tolerance: report and move on
            errors.append(f"{img_path.name}: {exc}")
            continue
        stroke_rel = f"strokes/{img_path.stem}.json"
        strokes.save(out / stroke_rel)
        rows.append(
            {
                "index": len(rows),
                "image": str(img_path.resolve()),
                "mask": str(mask_path.resolve()),
                "strokes": stroke_rel,
                "size": image.height,
                "domain": "real",
                "split": "train",
                "sha256": {"image": _sha256_file(img_path), "mask": _sha256_file(mask_path)},
            }
        )
    manifest_path = out / "manifest.jsonl"
    with open(manifest_path, "w") as mf:
        for row in rows:
            mf.write(json.dumps(row, sort_keys=True))
            mf.write("\n")
    return manifest_path, errors


def load_manifest(path) -> list[dict]:
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows
