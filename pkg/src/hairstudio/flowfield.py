"""Orientation fields, line integral convolution, and field brushes.

An orientation field stores, per pixel, the unit direction of minimum
intensity change. Orientations are mod-pi entities: v and -v are the same
orientation. The canonical representative has nonnegative y (and positive
x when y is zero); blending and interpolation happen in doubled-angle
space so the ambiguity never bites.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy import ndimage

from hairstudio.imagecore import RasterImage

__all__ = [
    "OrientationField",
    "ScalarFieldStack",
    "FieldBrush",
    "gaussian_kernel1d",
    "gaussian_derivative_kernel1d",
    "structure_tensor",
    "eig2x2",
    "minimum_change_field",
    "lic_filter",
    "smooth_color_field",
    "brush_field",
    "brush_color",
    "save_field",
    "load_field",
    "field_to_falsecolor",
]

_EIG_EPS = 1e-12
FIELD_MAGIC = b"HSOF"
FIELD_VERSION = 1


@dataclass(frozen=True)
class ScalarFieldStack:
    """Smoothed structure-tensor components per pixel."""

    jxx: np.ndarray
    jxy: np.ndarray
    jyy: np.ndarray

    def __post_init__(self):
        for name in ("jxx", "jxy", "jyy"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2:
                raise ValueError(f"{name} must be a (h, w) plane")
            object.__setattr__(self, name, arr)
        if self.jxx.shape != self.jxy.shape or self.jxx.shape != self.jyy.shape:
            raise ValueError("tensor planes must share one shape")
        # diagonal entries are smoothed squares; clip float dust
        object.__setattr__(self, "jxx", np.maximum(self.jxx, 0.0))
        object.__setattr__(self, "jyy", np.maximum(self.jyy, 0.0))

    @property
    def shape(self) -> tuple[int, int]:
        return self.jxx.shape


@dataclass(frozen=True)
class OrientationField:
    """Per-pixel unit orientation (mod pi) with a coherence weight in [0, 1].

    ``direction`` has shape (h, w, 2) storing (x, y) components with the
    canonical nonnegative-y representative; ``coherence`` is (h, w).
    ``reliable`` marks pixels whose coherence passed the extraction
    threshold; unreliable directions are kept but should not seed strokes.
    """

    direction: np.ndarray
    coherence: np.ndarray
    reliable: np.ndarray = dataclass_field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float32)
        c = np.asarray(self.coherence, dtype=np.float32)
        if d.ndim != 3 or d.shape[2] != 2:
            raise ValueError("direction must be (h, w, 2)")
        if c.shape != d.shape[:2]:
            raise ValueError("coherence extent must match direction")
        if not (np.isfinite(d).all() and np.isfinite(c).all()):
            raise ValueError("field contains non-finite values")
        norms = np.hypot(d[:, :, 0], d[:, :, 1])
        active = c > 0
        if active.any() and not np.allclose(norms[active], 1.0, atol=1e-3):
            raise ValueError("directions must be unit length where coherence > 0")
        r = self.reliable
        r = (c > 0).astype(np.uint8) if r is None else np.asarray(r, dtype=np.uint8)
        d = d.copy()
        d.setflags(write=False)
        c = np.clip(c, 0.0, 1.0)
        c.setflags(write=False)
        r = r.copy()
        r.setflags(write=False)
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "coherence", c)
        object.__setattr__(self, "reliable", r)

    @property
    def height(self) -> int:
        return self.direction.shape[0]

    @property
    def width(self) -> int:
        return self.direction.shape[1]

    @property
    def extent(self) -> tuple[int, int]:
        return (self.width, self.height)

    def angles(self) -> np.ndarray:
        """Orientation angle per pixel in [0, pi)."""
        a = np.arctan2(self.direction[:, :, 1], self.direction[:, :, 0])
        return np.mod(a, np.pi)


@dataclass(frozen=True)
class FieldBrush:
    """Disk brush blending an orientation angle (radians) or an RGB color."""

    center: tuple[float, float]
    radius: float
    intensity: float
    angle: float | None = None
    color: tuple[float, float, float] | None = None
    falloff: str = "smooth"  # "smooth" | "flat"

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("brush radius must be positive")
        if not 0.0 <= self.intensity <= 1.0:
            raise ValueError("brush intensity must lie in [0, 1]")
        if self.falloff not in ("smooth", "flat"):
            raise ValueError(f"unknown falloff {self.falloff!r}")
        if self.angle is None and self.color is None:
            raise ValueError("brush needs an angle or color payload")

    def weights(self, width: int, height: int) -> np.ndarray:
        """Per-pixel blend weight; exactly zero outside the disk."""
        ys, xs = np.mgrid[0:height, 0:width]
        d = np.hypot(xs - self.center[0], ys - self.center[1])
        inside = d <= self.radius
        if self.falloff == "flat":
            fall = inside.astype(np.float64)
        else:
            t = np.clip(1.0 - d / self.radius, 0.0, 1.0)
            fall = t * t * (3.0 - 2.0 * t)
            fall[~inside] = 0.0
        return self.intensity * fall


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Sampled Gaussian, truncated at 4 sigma, normalized to unit sum."""
    radius = max(1, int(np.ceil(4.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_derivative_kernel1d(sigma: float) -> np.ndarray:
    """Correlation kernel for d/dx under Gaussian smoothing.

    Scaled so a unit ramp yields exactly slope 1.
    """
    radius = max(1, int(np.ceil(4.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    g /= g.sum()
    k = x * g / (sigma**2)
    return k / (x * k).sum()


def _smooth(plane: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0:
        return plane
    k = gaussian_kernel1d(sigma)
    out = ndimage.correlate1d(plane, k, axis=0, mode="nearest")
    return ndimage.correlate1d(out, k, axis=1, mode="nearest")


def structure_tensor(
    img: RasterImage, sigma_grad: float = 1.0, sigma_smooth: float = 2.0
) -> ScalarFieldStack:
    """Smoothed outer product of the luminance gradient.

    Gradients come from separable Gaussian-derivative filtering at
    ``sigma_grad``; the products gx^2, gx*gy, gy^2 are then smoothed by a
    Gaussian at ``sigma_smooth``. Boundaries are edge-clamped.
    """
    if sigma_grad < 0.5:
        raise ValueError("sigma_grad must be >= 0.5")
    if sigma_smooth < 0:
        raise ValueError("sigma_smooth must be >= 0")
    lum = img.to_gray().astype(np.float64)
    g = gaussian_kernel1d(sigma_grad)
    dg = gaussian_derivative_kernel1d(sigma_grad)
    # x is the column axis (1), y the row axis (0)
    gx = ndimage.correlate1d(lum, dg, axis=1, mode="nearest")
    gx = ndimage.correlate1d(gx, g, axis=0, mode="nearest")
    gy = ndimage.correlate1d(lum, dg, axis=0, mode="nearest")
    gy = ndimage.correlate1d(gy, g, axis=1, mode="nearest")
    return ScalarFieldStack(
        jxx=_smooth(gx * gx, sigma_smooth),
        jxy=_smooth(gx * gy, sigma_smooth),
        jyy=_smooth(gy * gy, sigma_smooth),
    )


def eig2x2(J: ScalarFieldStack):
    """Closed-form eigen decomposition of the symmetric 2x2 tensor field.

    Returns (lam1, lam2, v1, v2) with lam1 >= lam2; v1/v2 are unit
    eigenvector planes of shape (h, w, 2). v2 is the minimum-change
    direction.
    """
    half_diff = 0.5 * (J.jxx - J.jyy)
    mean = 0.5 * (J.jxx + J.jyy)
    root = np.hypot(half_diff, J.jxy)
    lam1 = mean + root
    lam2 = mean - root
    # major axis angle; minor axis is perpendicular
    theta1 = 0.5 * np.arctan2(2.0 * J.jxy, J.jxx - J.jyy)
    v1 = np.stack([np.cos(theta1), np.sin(theta1)], axis=-1)
    theta2 = theta1 + 0.5 * np.pi
    v2 = np.stack([np.cos(theta2), np.sin(theta2)], axis=-1)
    return lam1, lam2, v1, v2


def canonicalize(direction: np.ndarray) -> np.ndarray:
    """Flip orientation vectors into the nonnegative-y half plane."""
    d = np.array(direction, dtype=np.float64, copy=True)
    flip = (d[..., 1] < 0) | ((d[..., 1] == 0) & (d[..., 0] < 0))
    d[flip] = -d[flip]
    return d


def minimum_change_field(J: ScalarFieldStack, tau_coherence: float = 0.05) -> OrientationField:
    """Orientation of the smaller-eigenvalue eigenvector plus coherence.

    Coherence is the normalized eigenvalue gap (lam1 - lam2)/(lam1 + lam2);
    degenerate tensors get coherence 0. Pixels below ``tau_coherence`` are
    flagged unreliable but keep their direction.
    """
    if not 0.0 <= tau_coherence < 1.0:
        raise ValueError("tau_coherence must lie in [0, 1)")
    lam1, lam2, _, v2 = eig2x2(J)
    coherence = (lam1 - lam2) / (lam1 + lam2 + _EIG_EPS)
    direction = canonicalize(v2)
    return OrientationField(
        direction=direction.astype(np.float32),
        coherence=np.clip(coherence, 0.0, 1.0).astype(np.float32),
        reliable=(coherence >= tau_coherence).astype(np.uint8),
    )


def _bilinear(plane: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear sample with edge clamp; xs/ys in pixel-center coordinates."""
    h, w = plane.shape[:2]
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    if plane.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = plane[y0, x0] * (1 - fx) + plane[y0, x1] * fx
    bot = plane[y1, x0] * (1 - fx) + plane[y1, x1] * fx
    return top * (1 - fy) + bot * fy


class _OrientationSampler:
    """Bilinear orientation lookup in doubled-angle space."""

    def __init__(self, field: OrientationField):
        dx = field.direction[:, :, 0].astype(np.float64)
        dy = field.direction[:, :, 1].astype(np.float64)
        self._c2 = dx * dx - dy * dy
        self._s2 = 2.0 * dx * dy
        self._coh = field.coherence.astype(np.float64)

    def direction(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        c2 = _bilinear(self._c2, xs, ys)
        s2 = _bilinear(self._s2, xs, ys)
        norm = np.hypot(c2, s2)
        theta = 0.5 * np.arctan2(s2, c2)
        d = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        # fully cancelling neighbors carry no orientation; keep a stub
        d[norm < 1e-12] = (1.0, 0.0)
        return d

    def coherence(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return _bilinear(self._coh, xs, ys)


def lic_filter(src: RasterImage, field: OrientationField, L: int, h: float) -> RasterImage:
    """Average ``src`` along field streamlines (box kernel, 2L+1 samples).

    Streamlines advance by midpoint steps of ``h`` pixels with a running
    sign so the mod-pi ambiguity never flips the walk; samples are
    bilinear and edge-clamped.
    """
    if L < 0:
        raise ValueError("L must be >= 0")
    if h <= 0:
        raise ValueError("step size must be positive")
    if (src.height, src.width) != (field.height, field.width):
        raise ValueError("source and field extents differ")
    data = src.data.astype(np.float64)
    if L == 0:
        return RasterImage(data)
    sampler = _OrientationSampler(field)
    hgt, wid = src.height, src.width
    ys0, xs0 = np.mgrid[0:hgt, 0:wid].astype(np.float64)
    acc = data.copy()

    def aligned(xs, ys, ref):
        d = sampler.direction(xs, ys)
        flip = np.sum(d * ref, axis=-1) < 0
        d[flip] = -d[flip]
        return d

    for sign in (1.0, -1.0):
        xs, ys = xs0.copy(), ys0.copy()
        prev = sign * sampler.direction(xs, ys)
        for _ in range(L):
            k1 = aligned(xs, ys, prev)
            k2 = aligned(xs + 0.5 * h * k1[..., 0], ys + 0.5 * h * k1[..., 1], k1)
            xs = np.clip(xs + h * k2[..., 0], 0.0, wid - 1.0)
            ys = np.clip(ys + h * k2[..., 1], 0.0, hgt - 1.0)
            prev = k2
            acc += _bilinear(data, xs, ys)
    return RasterImage(acc / (2 * L + 1))


def smooth_color_field(img: RasterImage, field: OrientationField, L: int = 4, h: float = 0.5) -> RasterImage:
    """Flow-aligned abstraction of the image, used as the stroke color field."""
    return RasterImage(lic_filter(RasterImage(img.rgb()), field, L, h).data)


def _wrap_to_half_open_pi(delta: np.ndarray) -> np.ndarray:
    """Wrap angles into (-pi, pi], sending the antipodal tie to +pi."""
    return delta - 2.0 * np.pi * np.ceil((delta - np.pi) / (2.0 * np.pi))


def brush_field(field: OrientationField, brush: FieldBrush) -> OrientationField:
    """Blend the field toward the brush angle inside the brush disk.

    Blending interpolates the doubled angle along the shorter arc, so
    orientations (not vectors) are mixed; weight intensity*falloff. The
    brushed region's coherence rises to at least the blend weight. Exact
    no-op outside the disk.
    """
    if brush.angle is None:
        raise ValueError("brush_field needs an angle payload")
    w = brush.weights(field.width, field.height)
    touched = w > 0
    if not touched.any():
        return field
    theta = field.angles().astype(np.float64)
    delta = _wrap_to_half_open_pi(2.0 * brush.angle - 2.0 * theta)
    theta_new = theta + 0.5 * w * delta
    direction = canonicalize(
        np.stack([np.cos(theta_new), np.sin(theta_new)], axis=-1)
    )
    out_dir = field.direction.astype(np.float64).copy()
    out_dir[touched] = direction[touched]
    coherence = field.coherence.astype(np.float64).copy()
    coherence[touched] = np.maximum(coherence[touched], w[touched])
    reliable = field.reliable.copy()
    reliable[touched & (w >= 1e-6)] = 1
    return OrientationField(
        direction=out_dir.astype(np.float32),
        coherence=coherence.astype(np.float32),
        reliable=reliable,
    )


def brush_color(img: RasterImage, brush: FieldBrush) -> RasterImage:
    """Blend the color field toward the brush color inside the disk."""
    if brush.color is None:
        raise ValueError("brush_color needs a color payload")
    w = brush.weights(img.width, img.height)[:, :, None]
    target = np.array(brush.color, dtype=np.float64).reshape(1, 1, 3)
    out = img.rgb().astype(np.float64) * (1.0 - w) + target * w
    return RasterImage(out)


def save_field(field: OrientationField, path):
    """Flat binary container: magic, version, extent, float32 planes."""
    header = FIELD_MAGIC + struct.pack("<III", FIELD_VERSION, field.width, field.height)
    planes = [
        field.direction[:, :, 0],
        field.direction[:, :, 1],
        field.coherence,
    ]
    with open(path, "wb") as f:
        f.write(header)
        for p in planes:
            f.write(np.ascontiguousarray(p, dtype="<f4").tobytes())


def load_field(path) -> OrientationField:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != FIELD_MAGIC:
        raise ValueError("not an orientation-field file")
    version, width, height = struct.unpack_from("<III", blob, 4)
    if version != FIELD_VERSION:
        raise ValueError(f"unsupported field version {version}")
    n = width * height
    body = np.frombuffer(blob, dtype="<f4", offset=16)
    if body.size != 3 * n:
        raise ValueError("truncated orientation-field file")
    dx = body[:n].reshape(height, width)
    dy = body[n : 2 * n].reshape(height, width)
    coh = body[2 * n :].reshape(height, width)
    return OrientationField(
        direction=np.stack([dx, dy], axis=-1), coherence=coh
    )


def field_to_falsecolor(field: OrientationField) -> RasterImage:
    """Hue encodes orientation, value encodes coherence (for docs/debug)."""
    hue = field.angles() / np.pi
    val = field.coherence.astype(np.float64)
    i = np.floor(hue * 6.0).astype(int) % 6
    f = hue * 6.0 - np.floor(hue * 6.0)
    p = np.zeros_like(val)
    q = val * (1.0 - f)
    t = val * f
    lut = [
        (val, t, p),
        (q, val, p),
        (p, val, t),
        (p, q, val),
        (t, p, val),
        (val, p, q),
    ]
    rgb = np.zeros(field.direction.shape[:2] + (3,), dtype=np.float64)
    for idx, (r, g, b) in enumerate(lut):
        sel = i == idx
        rgb[sel, 0] = r[sel]
        rgb[sel, 1] = g[sel]
        rgb[sel, 2] = b[sel]
    return RasterImage(rgb)
