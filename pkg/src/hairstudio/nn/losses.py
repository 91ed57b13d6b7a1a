"""Loss terms for the two-stage synthesis objective.

Total objective: l1_weight * L1 + adv_weight * L_adv + perceptual_weight
* L_per. The L1 term is spatially weighted: the initial-synthesis stage
supervises only the segmented region; the compositing stage supervises
the whole image with the region up-weighted by region_gain and the
boundary band up-weighted again by boundary_gain (compounding).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hairstudio.config import LossConfig
from hairstudio.nn import tensor as T
from hairstudio.nn.models import PerceptualProxy
from hairstudio.nn.tensor import Tensor

__all__ = [
    "l1_region_weights",
    "weighted_l1",
    "bce_with_logits",
    "AdversarialLosses",
    "adversarial_losses",
    "perceptual_distance",
    "total_loss",
]

LOGIT_CLIP = 30.0


def l1_region_weights(
    mask: np.ndarray, band: np.ndarray | None, cfg: LossConfig, stage: str
) -> np.ndarray:
    """Per-pixel L1 weight planes for (h, w) or batched (n, h, w) masks."""
    mask = np.asarray(mask)
    if stage == "initial":
        empty = mask.sum() == 0 if mask.ndim == 2 else (mask.sum(axis=(1, 2)) == 0).any()
        if empty:
            raise ValueError("initial-stage loss needs a nonempty mask: no supervised pixels")
        return mask.astype(np.float64)
    if stage == "composite":
        w = np.ones(mask.shape, dtype=np.float64)
        w[mask > 0] = cfg.region_gain
        if band is not None:
            w[np.asarray(band) > 0] = cfg.region_gain * cfg.boundary_gain
        return w
    raise ValueError(f"unknown stage {stage!r}")


def weighted_l1(out: Tensor, gt: Tensor, weights: np.ndarray) -> Tensor:
    """Mean over all pixels of weight * |out - gt|.

    ``weights`` is an (h, w) plane shared across the batch or (n, h, w)
    per-sample planes; either broadcasts across channels.
    """
    if out.shape != gt.shape:
        raise ValueError(f"shape mismatch: {out.shape} vs {gt.shape}")
    weights = np.asarray(weights)
    if weights.ndim == 3:
        if weights.shape[0] != out.shape[0] or weights.shape[1:] != out.shape[-2:]:
            raise ValueError(f"weight planes {weights.shape} do not match batch {out.shape}")
        weights = weights[:, None]
    elif weights.shape != out.shape[-2:]:
        raise ValueError(f"weight plane {weights.shape} does not match image {out.shape[-2:]}")
    w = Tensor(np.broadcast_to(weights, out.shape).astype(out.dtype))
    return T.reduce_mean(T.mul(T.absolute(out - gt), w))


def bce_with_logits(logits: Tensor, target: float) -> Tensor:
    """Stable binary cross entropy against a constant target, patch-averaged.

    Logits are clipped to +-30 before the loss for adversarial stability.
    """
    z = T.clip(logits, -LOGIT_CLIP, LOGIT_CLIP)
    # max(z,0) - z*t + log(1 + exp(-|z|))
    loss = T.relu(z) - z * float(target) + T.softplus(-T.absolute(z))
    return T.reduce_mean(loss)


@dataclass
class AdversarialLosses:
    d_real: Tensor
    d_fake: Tensor
    g: Tensor

    @property
    def d_total(self) -> Tensor:
        return self.d_real + self.d_fake


def adversarial_losses(disc, cond: Tensor, real: Tensor, fake: Tensor) -> AdversarialLosses:
    """Patch-GAN cross-entropy terms.

    The discriminator is pushed real -> 1 and fake -> 0 (fake detached so
    only D learns from it); the generator is pushed fake -> 1.
    """
    d_real = bce_with_logits(disc(cond, real), 1.0)
    d_fake = bce_with_logits(disc(cond, fake.detach()), 0.0)
    g = bce_with_logits(disc(cond, fake), 1.0)
    return AdversarialLosses(d_real=d_real, d_fake=d_fake, g=g)


def perceptual_distance(proxy: PerceptualProxy, a: Tensor, b: Tensor) -> Tensor:
    """Sum over the proxy's three stages of mean-squared feature difference."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.shape[1] != 3:
        raise ValueError("perceptual distance expects 3-channel inputs")
    total = None
    for fa, fb in zip(proxy.stages(a), proxy.stages(b)):
        diff = fa - fb
        term = T.reduce_mean(T.mul(diff, diff))
        total = term if total is None else total + term
    return total


def total_loss(
    out: Tensor,
    gt: Tensor,
    l1_weights: np.ndarray,
    adv_g: Tensor,
    proxy: PerceptualProxy,
    cfg: LossConfig,
):
    """Weighted sum of the three terms plus a per-component magnitude log."""
    l1 = weighted_l1(out, gt, l1_weights)
    per = perceptual_distance(proxy, out, gt)
    total = l1 * cfg.l1_weight + adv_g * cfg.adv_weight + per * cfg.perceptual_weight
    components = {
        "l1": float(l1.data),
        "adversarial": float(adv_g.data),
        "perceptual": float(per.data),
        "total": float(total.data),
    }
    return total, components
