"""Evaluation suite: L1, perceptual distance, MSE, PSNR, SSIM, and a
Frechet feature distance over the frozen proxy network.

Scale conventions: images live in [0, 1]; MSE and PSNR use the 8-bit
convention (pixel values scaled by 255, PSNR = 10 log10(255^2 / MSE),
capped at 99 dB). Per-image metrics are averaged per image by default; a
pooled variant (MSE pooled over all pixels first) is also emitted and
labeled, since the two conventions genuinely differ.

The Frechet metric fits a Gaussian to pooled proxy features of each set:
||mu_a - mu_b||^2 + tr(Sa + Sb - 2 (Sa Sb)^(1/2)), computed through a
symmetric eigendecomposition. Values are not comparable to classifier-
based scores; only orderings within a run are meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from hairstudio.imagecore import RasterImage, check_same_extent
from hairstudio.nn.models import PerceptualProxy
from hairstudio.nn.losses import perceptual_distance
from hairstudio.nn.tensor import Tensor

__all__ = [
    "PSNR_CAP_DB",
    "MetricReport",
    "mse_8bit",
    "psnr",
    "ssim",
    "gaussian_window",
    "fid_proxy",
    "proxy_feature_sets",
    "evaluate_pairs",
    "METRIC_COLUMNS",
    "HIGHER_IS_BETTER",
]

PSNR_CAP_DB = 99.0
METRIC_COLUMNS = ("l1", "perceptual", "mse", "psnr_db", "ssim", "fid_proxy")
HIGHER_IS_BETTER = {"l1": False, "perceptual": False, "mse": False, "psnr_db": True, "ssim": True, "fid_proxy": False}

_SSIM_K1 = 0.01
_SSIM_K2 = 0.03
_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5


@dataclass
class MetricReport:
    """Rows of per-variant metrics in Table-style layout."""

    rows: dict[str, dict[str, float]] = dc_field(default_factory=dict)
    sample_count: int = 0
    seed: int = 0
    notes: dict[str, str] = dc_field(default_factory=dict)

    def add_row(self, name: str, metrics: dict[str, float]):
        missing = set(METRIC_COLUMNS) - set(metrics)
        if missing:
            raise ValueError(f"row {name!r} is missing metrics {sorted(missing)}")
        bad = [k for k in ("l1", "mse", "fid_proxy") if metrics[k] < 0]
        if bad:
            raise ValueError(f"row {name!r} has negative {bad}")
        if not -1.0 <= metrics["ssim"] <= 1.0:
            raise ValueError(f"row {name!r} ssim out of range")
        if not np.isfinite(metrics["psnr_db"]):
            raise ValueError(f"row {name!r} psnr not finite")
        self.rows[name] = {k: float(metrics[k]) for k in METRIC_COLUMNS}

    def to_csv(self) -> str:
        lines = ["variant," + ",".join(METRIC_COLUMNS)]
        for name, row in self.rows.items():
            lines.append(name + "," + ",".join(f"{row[c]:.6g}" for c in METRIC_COLUMNS))
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        headers = ["variant"] + [
            c + ("↑" if HIGHER_IS_BETTER[c] else "↓") for c in METRIC_COLUMNS
        ]
        body = [[name] + [f"{row[c]:.4f}" for c in METRIC_COLUMNS] for name, row in self.rows.items()]
        widths = [max(len(r[i]) for r in [headers] + body) for i in range(len(headers))]
        out = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
        for r in body:
            out.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
        return "\n".join(out) + "\n"


def mse_8bit(a: RasterImage, b: RasterImage) -> float:
    """Mean squared error on the 0..255 scale."""
    check_same_extent(a, b, "metric inputs")
    diff = (a.rgb().astype(np.float64) - b.rgb().astype(np.float64)) * 255.0
    return float(np.mean(diff * diff))


def psnr(a: RasterImage, b: RasterImage) -> float:
    """10 log10(255^2 / MSE) in dB, capped at 99 for (near-)identical pairs."""
    m = mse_8bit(a, b)
    if m <= 0:
        return PSNR_CAP_DB
    return float(min(PSNR_CAP_DB, 10.0 * np.log10(255.0**2 / m)))


def gaussian_window(size: int = _SSIM_WINDOW, sigma: float = _SSIM_SIGMA) -> np.ndarray:
    half = size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a: RasterImage, b: RasterImage) -> float:
    """Mean local SSIM on luminance; 11x11 Gaussian window, sigma 1.5.

    Standard stabilizers C1=(K1 L)^2, C2=(K2 L)^2 with L=1 on the [0, 1]
    scale; windows are evaluated wherever they fit (valid positions).
    """
    check_same_extent(a, b, "metric inputs")
    x = a.to_gray().astype(np.float64)
    y = b.to_gray().astype(np.float64)
    size = _SSIM_WINDOW
    if x.shape[0] < size or x.shape[1] < size:
        raise ValueError(f"images smaller than the {size}x{size} SSIM window")
    w = gaussian_window()
    c1 = (_SSIM_K1 * 1.0) ** 2
    c2 = (_SSIM_K2 * 1.0) ** 2
    wx = _valid_windows(x, size)
    wy = _valid_windows(y, size)
    kernel = w.reshape(1, 1, size, size)
    mu_x = (wx * kernel).sum(axis=(2, 3))
    mu_y = (wy * kernel).sum(axis=(2, 3))
    xx = (wx * wx * kernel).sum(axis=(2, 3)) - mu_x * mu_x
    yy = (wy * wy * kernel).sum(axis=(2, 3)) - mu_y * mu_y
    xy = (wx * wy * kernel).sum(axis=(2, 3)) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def _valid_windows(x: np.ndarray, size: int) -> np.ndarray:
    return np.lib.stride_tricks.sliding_window_view(x, (size, size))


def proxy_feature_sets(images: list[RasterImage], proxy: PerceptualProxy) -> np.ndarray:
    """Pooled penultimate-stage proxy features, one row per image."""
    feats = []
    for img in images:
        x = img.rgb().astype(np.float32).transpose(2, 0, 1)[None] * 2.0 - 1.0
        feats.append(proxy.pooled_features(Tensor(x))[0])
    return np.asarray(feats, dtype=np.float64)


def _sym_sqrt(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((m + m.T) / 2.0)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_from_stats(mu_a, cov_a, mu_b, cov_b, eps: float = 1e-10) -> float:
    """Frechet distance between two Gaussians via a symmetric root.

    tr((Sa Sb)^(1/2)) is computed as tr((Sa^(1/2) Sb Sa^(1/2))^(1/2)),
    which stays real and PSD; tiny eps*I regularization guards rank
    deficiency.
    """
    dim = mu_a.shape[0]
    cov_a = cov_a + eps * np.eye(dim)
    cov_b = cov_b + eps * np.eye(dim)
    root_a = _sym_sqrt(cov_a)
    middle = _sym_sqrt(root_a @ cov_b @ root_a)
    dist = float(np.sum((mu_a - mu_b) ** 2) + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(middle))
    return max(dist, 0.0)


def fid_proxy(set_a: list[RasterImage] | np.ndarray, set_b: list[RasterImage] | np.ndarray, proxy: PerceptualProxy | None = None) -> float:
    """Frechet distance between proxy-feature Gaussians of two image sets.

    Accepts image lists or precomputed (n, d) feature arrays; needs at
    least 2 items per set.
    """
    if isinstance(set_a, np.ndarray):
        fa, fb = np.asarray(set_a, dtype=np.float64), np.asarray(set_b, dtype=np.float64)
    else:
        proxy = proxy or PerceptualProxy()
        fa = proxy_feature_sets(list(set_a), proxy)
        fb = proxy_feature_sets(list(set_b), proxy)
    if fa.shape[0] < 2 or fb.shape[0] < 2:
        raise ValueError("Frechet distance needs at least 2 images per set")
    mu_a, mu_b = fa.mean(axis=0), fb.mean(axis=0)
    cov_a = np.cov(fa, rowvar=False)
    cov_b = np.cov(fb, rowvar=False)
    return frechet_from_stats(mu_a, cov_a, mu_b, cov_b)


def evaluate_pairs(
    outputs: list[RasterImage],
    targets: list[RasterImage],
    proxy: PerceptualProxy | None = None,
) -> dict[str, float]:
    """All six metrics over aligned (output, target) lists.

    l1/mse/psnr/ssim/perceptual are averaged per image; ``mse_pooled``
    and ``psnr_pooled_db`` (pooled over all pixels first) ride along for
    the alternate convention.
    """
    if len(outputs) != len(targets) or not outputs:
        raise ValueError("need equal, nonempty output/target lists")
    proxy = proxy or PerceptualProxy()
    l1s, mses, psnrs, ssims, pers = [], [], [], [], []
    for out, gt in zip(outputs, targets):
        check_same_extent(out, gt, "evaluation pair")
        l1s.append(float(np.mean(np.abs(out.rgb().astype(np.float64) - gt.rgb().astype(np.float64)))))
        mses.append(mse_8bit(out, gt))
        psnrs.append(psnr(out, gt))
        ssims.append(ssim(out, gt))
        a = Tensor(out.rgb().astype(np.float32).transpose(2, 0, 1)[None] * 2 - 1)
        b = Tensor(gt.rgb().astype(np.float32).transpose(2, 0, 1)[None] * 2 - 1)
        pers.append(float(perceptual_distance(proxy, a, b).data))
    pooled_mse = float(np.mean(mses))  # pixel-pooled == mean of per-image MSE at equal extents
    metrics = {
        "l1": float(np.mean(l1s)),
        "perceptual": float(np.mean(pers)),
        "mse": float(np.mean(mses)),
        "psnr_db": float(np.mean(psnrs)),
        "ssim": float(np.mean(ssims)),
        "fid_proxy": fid_proxy(outputs, targets, proxy) if len(outputs) >= 2 else 0.0,
        "mse_pooled": pooled_mse,
        "psnr_pooled_db": float(min(PSNR_CAP_DB, 10.0 * np.log10(255.0**2 / pooled_mse))) if pooled_mse > 0 else PSNR_CAP_DB,
    }
    return metrics
