"""Pixel containers, binary morphology, boundary bands, and compositing.

Images are stored as float32 arrays in [0, 1], shape (height, width,
channels); masks as uint8 arrays in {0, 1}, shape (height, width).
Pixel (x, y) means column x, row y. All operations are pure functions
over immutable value-semantic containers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

__all__ = [
    "RasterImage",
    "MaskImage",
    "DegenerateKernelError",
    "ExtentMismatchError",
    "erode",
    "dilate",
    "boundary_band",
    "composite_over",
    "load_image",
    "save_image",
    "load_mask",
    "save_mask",
]


class DegenerateKernelError(ValueError):
    """Structuring element does not fit the image in either dimension."""


class ExtentMismatchError(ValueError):
    """Two containers that must share an extent do not."""


@dataclass(frozen=True)
class RasterImage:
    """Dense pixel grid with 1 (gray), 3 (RGB) or 4 (RGBA) float channels.

    Values are clamped to [0, 1] on construction; non-finite input is
    rejected.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3, 4):
            raise ValueError(f"expected (h, w, 1|3|4) image data, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("image data contains non-finite values")
        arr = np.clip(arr, 0.0, 1.0)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def extent(self) -> tuple[int, int]:
        return (self.width, self.height)

    def to_gray(self) -> np.ndarray:
        """Luminance plane (Rec. 601 weights for RGB(A), identity for gray)."""
        if self.channels == 1:
            return self.data[:, :, 0]
        r, g, b = self.data[:, :, 0], self.data[:, :, 1], self.data[:, :, 2]
        return 0.299 * r + 0.587 * g + 0.114 * b

    def rgb(self) -> np.ndarray:
        """RGB planes, broadcasting gray to three channels."""
        if self.channels == 1:
            return np.repeat(self.data, 3, axis=2)
        return self.data[:, :, :3]


@dataclass(frozen=True)
class MaskImage:
    """Binary occupancy grid, values in {0, 1}."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"expected (h, w) mask data, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            arr = (arr > 0.5).astype(np.uint8) if arr.dtype.kind == "f" else arr.astype(np.uint8)
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("mask values must be 0 or 1")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def extent(self) -> tuple[int, int]:
        return (self.width, self.height)

    def count(self) -> int:
        return int(self.data.sum())

    def is_empty(self) -> bool:
        return self.count() == 0


def check_same_extent(a, b, what: str = "inputs"):
    if (a.width, a.height) != (b.width, b.height):
        raise ExtentMismatchError(
            f"{what} extents differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def _check_kernel(mask: MaskImage, k: int):
    if k < 1:
        raise ValueError(f"kernel size must be >= 1, got {k}")
    if k > mask.width and k > mask.height:
        raise DegenerateKernelError(
            f"kernel {k} exceeds both image dimensions {mask.width}x{mask.height}"
        )


def _windowed(mask: MaskImage, k: int, pad_value: int) -> np.ndarray:
    """All k x k windows of the padded mask, shape (h, w, k, k).

    The window for output pixel (x, y) spans rows y-k//2 .. y+(k-1)//2 and
    the analogous columns, so odd kernels are centered and even kernels
    lean one pixel up-left.
    """
    lo = k // 2
    hi = k - 1 - lo
    padded = np.pad(mask.data, ((lo, hi), (lo, hi)), constant_values=pad_value)
    return np.lib.stride_tricks.sliding_window_view(padded, (k, k))


def erode(mask: MaskImage, k: int, pad_value: int = 0) -> MaskImage:
    """Morphological erosion by a k x k square structuring element.

    Out-of-bounds pixels read as ``pad_value`` (default 0: masks never
    extend past the photo, so the border erodes).
    """
    _check_kernel(mask, k)
    return MaskImage(_windowed(mask, k, pad_value).min(axis=(2, 3)))


def dilate(mask: MaskImage, k: int, pad_value: int = 0) -> MaskImage:
    """Morphological dilation by a k x k square structuring element."""
    _check_kernel(mask, k)
    return MaskImage(_windowed(mask, k, pad_value).max(axis=(2, 3)))


def boundary_band(mask: MaskImage, k: int) -> MaskImage:
    """Ring straddling the mask boundary: dilate(mask, k) AND NOT erode(mask, k)."""
    d = dilate(mask, k)
    e = erode(mask, k)
    return MaskImage(d.data & (1 - e.data))


def composite_over(fg: RasterImage, bg: RasterImage) -> RasterImage:
    """Alpha-composite an RGBA foreground over an RGB background."""
    if fg.channels != 4:
        raise ValueError("foreground must be RGBA")
    if bg.channels not in (1, 3):
        raise ValueError("background must be gray or RGB")
    check_same_extent(fg, bg, "composite")
    alpha = fg.data[:, :, 3:4]
    out = alpha * fg.data[:, :, :3] + (1.0 - alpha) * bg.rgb()
    return RasterImage(out)


def load_image(path) -> RasterImage:
    """Load an 8-bit PNG (gray/RGB/RGBA) as floats in [0, 1]."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB", "RGBA"):
            im = im.convert("RGBA" if "A" in im.getbands() else "RGB")
        arr = np.asarray(im, dtype=np.float32) / 255.0
    return RasterImage(arr)


def save_image(img: RasterImage, path):
    arr = np.round(img.data * 255.0).astype(np.uint8)
    if arr.shape[2] == 1:
        Image.fromarray(arr[:, :, 0], mode="L").save(path)
    else:
        Image.fromarray(arr).save(path)


def load_mask(path) -> MaskImage:
    """Load a mask from 8-bit grayscale PNG; anything above 127 is set."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return MaskImage((arr > 127).astype(np.uint8))


def save_mask(mask: MaskImage, path):
    Image.fromarray(mask.data * np.uint8(255), mode="L").save(path)
