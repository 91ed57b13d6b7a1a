"""Generators, conditional patch discriminators, and the perceptual proxy.

The generator is an encoder-decoder with skip connections: stride-2
convolution encoder, nearest-upsample decoder that concatenates the
matching encoder feature at each level, and a final stride-1 3x3
convolution head (tanh) that also sees the raw input, so low-level
detail and global color survive the normalized trunk.
"""

from __future__ import annotations

import numpy as np

from hairstudio.nn import tensor as T
from hairstudio.nn.layers import Conv2d, InstanceNorm2d, Module
from hairstudio.nn.tensor import Tensor

__all__ = [
    "Generator",
    "Discriminator",
    "PerceptualProxy",
    "count_parameters",
    "PERCEPTUAL_PROXY_SEED",
]

PERCEPTUAL_PROXY_SEED = 0x5EED0


def count_parameters(module: Module) -> int:
    return sum(p.data.size for p in module.parameters())


def _enc_channels(base: int, depth: int) -> list[int]:
    return [min(base * 2**i, base * 8) for i in range(depth)]


class Generator(Module):
    """Encoder-decoder image synthesis network.

    Input (n, in_ch, H, W) with H = W a power of two >= 2**depth; output
    (n, 3, H, W) in [-1, 1].
    """

    def __init__(self, in_ch: int, base: int = 16, depth: int = 4, rng=None, dtype=np.float32):
        if depth < 3:
            raise ValueError("generator depth must be >= 3")
        rng = rng or np.random.default_rng(0)
        self.in_ch = in_ch
        self.depth = depth
        chans = _enc_channels(base, depth)
        self.enc = []
        prev = in_ch
        for c in chans:
            self.enc.append(Conv2d(prev, c, 4, stride=2, pad=1, rng=rng, dtype=dtype))
            prev = c
        # the first encoder level carries raw intensities: no norm there
        self.enc_norm = [None] + [InstanceNorm2d(c, dtype=dtype) for c in chans[1:]]
        self.dec = []
        self.dec_norm = []
        for i in range(depth - 2, -1, -1):
            skip_ch = chans[i]
            self.dec.append(Conv2d(prev + skip_ch, skip_ch, 3, stride=1, pad=1, rng=rng, dtype=dtype))
            self.dec_norm.append(InstanceNorm2d(skip_ch, dtype=dtype))
            prev = skip_ch
        self.head = Conv2d(prev + in_ch, base, 3, stride=1, pad=1, rng=rng, dtype=dtype)
        self.head_norm = InstanceNorm2d(base, dtype=dtype)
        self.final = Conv2d(base + in_ch, 3, 3, stride=1, pad=1, rng=rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        n, c, h, w = x.shape
        if c != self.in_ch:
            raise ValueError(f"expected {self.in_ch} input channels, got {c}")
        if h != w or h < 2**self.depth or (h & (h - 1)) != 0:
            raise ValueError(f"spatial extent must be a square power of two >= {2**self.depth}, got {h}x{w}")
        feats = []
        z = x
        for conv, norm in zip(self.enc, self.enc_norm):
            z = conv(z)
            if norm is not None:
                z = norm(z)
            z = T.leaky_relu(z, 0.2)
            feats.append(z)
        for i, (conv, norm) in enumerate(zip(self.dec, self.dec_norm)):
            z = T.upsample_nearest2(z)
            skip = feats[self.depth - 2 - i]
            z = T.concat([z, skip], axis=1)
            z = T.relu(norm(conv(z)))
        z = T.upsample_nearest2(z)
        z = T.concat([z, x], axis=1)
        z = T.relu(self.head_norm(self.head(z)))
        z = T.concat([z, x], axis=1)
        return T.tanh(self.final(z))


class Discriminator(Module):
    """Conditional patch discriminator.

    Judges (condition, image) pairs; emits a logit map of shape
    (n, 1, H/2**depth, W/2**depth).
    """

    def __init__(self, cond_ch: int, img_ch: int = 3, base: int = 16, depth: int = 4, rng=None, dtype=np.float32):
        rng = rng or np.random.default_rng(0)
        self.cond_ch = cond_ch
        self.img_ch = img_ch
        self.depth = depth
        chans = _enc_channels(base, depth)
        self.convs = []
        self.norms = []
        prev = cond_ch + img_ch
        for i, c in enumerate(chans):
            self.convs.append(Conv2d(prev, c, 4, stride=2, pad=1, rng=rng, dtype=dtype))
            self.norms.append(InstanceNorm2d(c, dtype=dtype) if i > 0 else None)
            prev = c
        self.head = Conv2d(prev, 1, 3, stride=1, pad=1, rng=rng, dtype=dtype)

    def forward(self, cond: Tensor, img: Tensor) -> Tensor:
        if cond.shape[1] != self.cond_ch or img.shape[1] != self.img_ch:
            raise ValueError(
                f"expected ({self.cond_ch}, {self.img_ch}) channels, got ({cond.shape[1]}, {img.shape[1]})"
            )
        if cond.shape[0] != img.shape[0] or cond.shape[2:] != img.shape[2:]:
            raise ValueError("condition and image extents differ")
        z = T.concat([cond, img], axis=1)
        for conv, norm in zip(self.convs, self.norms):
            z = conv(z)
            if norm is not None:
                z = norm(z)
            z = T.leaky_relu(z, 0.2)
        return self.head(z)


class PerceptualProxy(Module):
    """Frozen, fixed-seed random 8-layer conv feature net.

    Stands in for a pretrained classifier as the perceptual metric:
    random convolutional features are differentiable, deterministic, and
    carry enough structure to rank image similarity. Three stages (after
    layers 2, 4, 6, each stride-2) feed the perceptual distance; the
    penultimate stage (layer 7), globally pooled, feeds the Frechet
    metric. Inputs are (n, 3, H, W) in [-1, 1] with H, W >= 8.
    """

    STAGE_LAYERS = (1, 3, 5)  # 0-based indices of the stage outputs
    PENULTIMATE = 6

    def __init__(self, dtype=np.float32, seed: int = PERCEPTUAL_PROXY_SEED):
        rng = np.random.default_rng(seed)
        # (in, out, kernel, stride); stride-2 layers use k=4 so the
        # geometry tiles exactly on even inputs
        spec = [
            (3, 16, 3, 1),
            (16, 16, 4, 2),
            (16, 32, 3, 1),
            (32, 32, 4, 2),
            (32, 64, 3, 1),
            (64, 64, 4, 2),
            (64, 64, 3, 1),
            (64, 64, 3, 1),
        ]
        self.convs = [
            Conv2d(i, o, k, stride=s, pad=1, rng=rng, init="he", dtype=dtype) for i, o, k, s in spec
        ]
        self.freeze()

    def stages(self, x: Tensor) -> list[Tensor]:
        out = []
        z = x
        for i, conv in enumerate(self.convs):
            z = T.leaky_relu(conv(z), 0.2)
            if i in self.STAGE_LAYERS:
                out.append(z)
        return out

    def forward(self, x: Tensor) -> list[Tensor]:
        return self.stages(x)

    def pooled_features(self, x: Tensor) -> np.ndarray:
        """Penultimate-stage features, globally average pooled, as numpy."""
        z = x
        for i, conv in enumerate(self.convs):
            z = T.leaky_relu(conv(z), 0.2)
            if i == self.PENULTIMATE:
                return z.data.mean(axis=(2, 3))
        raise AssertionError("unreachable")
