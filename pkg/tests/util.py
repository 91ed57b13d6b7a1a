"""Small field/image builders shared across test modules."""

import numpy as np

from hairstudio.flowfield import OrientationField, canonicalize
from hairstudio.imagecore import MaskImage, RasterImage


def constant_field(size: int, dx: float, dy: float) -> OrientationField:
    d = np.zeros((size, size, 2))
    d[:, :, 0], d[:, :, 1] = dx, dy
    return OrientationField(
        direction=canonicalize(d).astype(np.float32),
        coherence=np.ones((size, size), dtype=np.float32),
    )


def circular_field(size: int, center) -> OrientationField:
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    rx, ry = xs - center[0], ys - center[1]
    r = np.hypot(rx, ry)
    r[r < 1e-9] = 1.0
    tangent = np.stack([-ry / r, rx / r], axis=-1)
    return OrientationField(
        direction=canonicalize(tangent).astype(np.float32),
        coherence=np.ones((size, size), dtype=np.float32),
    )


def full_mask(size: int) -> MaskImage:
    return MaskImage(np.ones((size, size), dtype=np.uint8))


def grating_image(angle_deg: float, size: int = 64, period: float = 16.0) -> RasterImage:
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    a = np.deg2rad(angle_deg)
    phase = (xs * np.cos(a) + ys * np.sin(a)) * 2 * np.pi / period
    return RasterImage(0.5 + 0.5 * np.sin(phase))


def angdiff_mod_pi(a, b):
    return np.abs(np.mod(np.asarray(a) - np.asarray(b) + np.pi / 2, np.pi) - np.pi / 2)
