"""Two-stage synthesis and training.

Stage 1 (initial synthesis) maps [mask | stroke RGBA] (5 channels) to the
hair region; stage 2 (refinement/compositing) maps [stage-1 RGB | mask |
masked target RGB] (7 channels) to the full image. A parallel pair of
"init" networks with identical architectures is trained without strokes
(constant mean-color fill) for conditional-inpainting initialization.

Training phases move forward only: pretrain-synthetic -> refine-real ->
end-to-end; each later phase refuses to run unless the earlier phase left
a parameter digest behind. All randomness is seeded, so a rerun with the
same config reproduces parameter digests bit for bit.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import time
from pathlib import Path

import numpy as np

from hairstudio.config import LossConfig, RunConfig, TrainSchedule
from hairstudio.imagecore import MaskImage, RasterImage, boundary_band, dilate
from hairstudio.nn.layers import Module
from hairstudio.nn.losses import bce_with_logits, l1_region_weights, perceptual_distance, weighted_l1
from hairstudio.nn.models import Discriminator, Generator, PerceptualProxy
from hairstudio.nn.optim import Adam
from hairstudio.nn.tensor import Tensor
from hairstudio.nn import checkpoint as ckpt
from hairstudio.strokes import StrokeSet, rasterize_strokes
from hairstudio.synthdata import load_manifest

__all__ = [
    "STAGE1_CHANNELS",
    "STAGE2_CHANNELS",
    "PHASES",
    "PhaseError",
    "UntrainedError",
    "TrainingSet",
    "PipelineState",
    "load_training_set",
    "build_stage1_input",
    "build_init_input",
    "synthesize",
    "synthesize_with_timing",
    "synthesize_init",
    "train_stage1",
    "train_end_to_end",
    "stage1_validation_l1",
    "compositing_deviation",
    "ablation_variants",
]

STAGE1_CHANNELS = 5  # mask + stroke RGBA
STAGE2_CHANNELS = 7  # stage-1 RGB + mask + masked target RGB
PHASES = ("untrained", "pretrain-synthetic", "refine-real", "end-to-end")


class PhaseError(RuntimeError):
    """A training phase was requested out of order."""


class UntrainedError(RuntimeError):
    """Inference was requested from an untrained pipeline."""


def _to_net(x: np.ndarray) -> np.ndarray:
    """[0, 1] module boundary -> [-1, 1] network domain."""
    return (x.astype(np.float32) * 2.0 - 1.0).astype(np.float32)


def _from_net(x: np.ndarray) -> np.ndarray:
    return np.clip((x.astype(np.float64) + 1.0) / 2.0, 0.0, 1.0)


@dataclasses.dataclass
class TrainingSet:
    """In-memory tensors for one manifest split, already in [-1, 1]."""

    x1: np.ndarray  # (n, 5, h, w) mask + strokes
    x1_init: np.ndarray  # (n, 5, h, w) mask + mean-color fill
    target_region: np.ndarray  # (n, 3, h, w) image masked to the region
    target_full: np.ndarray  # (n, 3, h, w)
    masked_rgb: np.ndarray  # (n, 3, h, w) image with the region blanked
    masks: np.ndarray  # (n, h, w) uint8
    bands: np.ndarray  # (n, h, w) uint8
    mean_colors: np.ndarray  # (n, 3) in [0, 1]
    size: int

    def __len__(self) -> int:
        return self.x1.shape[0]

    def subset(self, idx) -> "TrainingSet":
        idx = np.asarray(idx)
        return TrainingSet(
            x1=self.x1[idx],
            x1_init=self.x1_init[idx],
            target_region=self.target_region[idx],
            target_full=self.target_full[idx],
            masked_rgb=self.masked_rgb[idx],
            masks=self.masks[idx],
            bands=self.bands[idx],
            mean_colors=self.mean_colors[idx],
            size=self.size,
        )


def build_stage1_input(mask: MaskImage, stroke_raster: RasterImage) -> np.ndarray:
    """(5, h, w) float32 in [0, 1]: mask plane then stroke RGBA planes."""
    if stroke_raster.channels != 4:
        raise ValueError("stroke raster must be RGBA")
    planes = [mask.data.astype(np.float32)]
    planes += [stroke_raster.data[:, :, c].astype(np.float32) for c in range(4)]
    return np.stack(planes, axis=0)


def build_init_input(mask: MaskImage, mean_color) -> np.ndarray:
    """(5, h, w) float32: mask plane plus a constant RGBA fill inside it."""
    mean_color = np.asarray(mean_color, dtype=np.float32)
    if mean_color.shape != (3,):
        raise ValueError("mean_color must be RGB")
    m = mask.data.astype(np.float32)
    planes = [m]
    planes += [m * float(c) for c in mean_color]
    planes.append(m.copy())  # alpha = 1 inside the region
    return np.stack(planes, axis=0)


def load_training_set(
    manifest_path,
    split: str | None = None,
    morph_kernel: int = 10,
) -> TrainingSet:
    """Materialize a manifest split as network-ready tensors."""
    from hairstudio.imagecore import load_image, load_mask

    base = Path(manifest_path).parent
    rows = load_manifest(manifest_path)
    if split is not None:
        rows = [r for r in rows if r["split"] == split]
    if not rows:
        raise ValueError(f"manifest split {split!r} is empty")
    x1, x1i, tr, tf, mrgb, masks, bands, means = [], [], [], [], [], [], [], []
    size = None
    for row in rows:
        img_path = Path(row["image"])
        mask_path = Path(row["mask"])
        img = load_image(img_path if img_path.is_absolute() else base / img_path)
        mask = load_mask(mask_path if mask_path.is_absolute() else base / mask_path)
        strokes = StrokeSet.load(base / row["strokes"])
        size = size or img.height
        raster = rasterize_strokes(strokes, mask)
        rgb = img.rgb().astype(np.float32)
        m = mask.data.astype(np.float32)
        mean_color = rgb[mask.data.astype(bool)].mean(axis=0)
        x1.append(_to_net(build_stage1_input(mask, raster)))
        x1i.append(_to_net(build_init_input(mask, mean_color)))
        tr.append(_to_net((rgb * m[:, :, None]).transpose(2, 0, 1)))
        tf.append(_to_net(rgb.transpose(2, 0, 1)))
        mrgb.append(_to_net((rgb * (1.0 - m[:, :, None])).transpose(2, 0, 1)))
        masks.append(mask.data)
        bands.append(boundary_band(mask, morph_kernel).data)
        means.append(mean_color)
    return TrainingSet(
        x1=np.stack(x1),
        x1_init=np.stack(x1i),
        target_region=np.stack(tr),
        target_full=np.stack(tf),
        masked_rgb=np.stack(mrgb),
        masks=np.stack(masks),
        bands=np.stack(bands),
        mean_colors=np.stack(means),
        size=size,
    )


class PipelineState:
    """Networks, phase bookkeeping, and loss history for one run."""

    def __init__(self, cfg: RunConfig | None = None):
        self.cfg = cfg or RunConfig()
        m = self.cfg.model
        rng = np.random.default_rng(self.cfg.seed)
        self.g1 = Generator(STAGE1_CHANNELS, m.base_width, m.depth, rng=rng)
        self.d1 = Discriminator(STAGE1_CHANNELS, 3, m.base_width, m.depth, rng=rng)
        self.g2 = Generator(STAGE2_CHANNELS, m.base_width, m.depth, rng=rng)
        self.d2 = Discriminator(STAGE2_CHANNELS, 3, m.base_width, m.depth, rng=rng)
        self.init_g1 = Generator(STAGE1_CHANNELS, m.base_width, m.depth, rng=rng)
        self.init_d1 = Discriminator(STAGE1_CHANNELS, 3, m.base_width, m.depth, rng=rng)
        self.init_g2 = Generator(STAGE2_CHANNELS, m.base_width, m.depth, rng=rng)
        self.init_d2 = Discriminator(STAGE2_CHANNELS, 3, m.base_width, m.depth, rng=rng)
        self.proxy = PerceptualProxy()
        self.phase = "untrained"
        self.init_phase = "untrained"
        self.phase_digests: dict[str, str] = {}
        self.history: dict[str, list[dict]] = {}
        assert self.g1.in_ch == STAGE1_CHANNELS and self.g2.in_ch == STAGE2_CHANNELS

    # -- bookkeeping ---------------------------------------------------------

    def nets(self, variant: str) -> tuple[Generator, Discriminator, Generator, Discriminator]:
        if variant == "stroke":
            return self.g1, self.d1, self.g2, self.d2
        if variant == "init":
            return self.init_g1, self.init_d1, self.init_g2, self.init_d2
        raise ValueError(f"unknown variant {variant!r}")

    def params_digest(self, variant: str = "stroke") -> str:
        g1, d1, g2, d2 = self.nets(variant)
        h = hashlib.sha256()
        for net in (g1, d1, g2, d2):
            for name, p in net.named_parameters():
                h.update(name.encode())
                h.update(np.ascontiguousarray(p.data, dtype="<f4").tobytes())
        return h.hexdigest()

    def _advance(self, target: str, variant: str):
        attr = "phase" if variant == "stroke" else "init_phase"
        current = getattr(self, attr)
        if PHASES.index(target) < PHASES.index(current):
            raise PhaseError(f"phase may only move forward: {current} -> {target}")
        setattr(self, attr, target)
        self.phase_digests[f"{variant}:{target}"] = self.params_digest(variant)

    def require_digest(self, phases: tuple[str, ...], variant: str):
        keys = [f"{variant}:{p}" for p in phases]
        if not any(k in self.phase_digests for k in keys):
            raise PhaseError(
                f"{variant} variant needs a completed phase in {phases} before this step"
            )

    # -- persistence -----------------------------------------------------------

    def save(self, path, optimizers: dict[str, Adam] | None = None):
        meta = {
            "kind": "hairstudio-pipeline",
            "config": dataclasses.asdict(self.cfg),
            "phase": self.phase,
            "init_phase": self.init_phase,
            "phase_digests": self.phase_digests,
        }
        blobs: dict[str, np.ndarray] = {}
        for prefix, net in self._net_map().items():
            for name, p in net.named_parameters():
                blobs[f"{prefix}/{name}"] = p.data
        if optimizers:
            for oname, opt in optimizers.items():
                state = opt.state_dict()
                blobs[f"opt/{oname}/t"] = np.asarray([state["t"]], dtype=np.int64)
                for i, (m, v) in enumerate(zip(state["m"], state["v"])):
                    blobs[f"opt/{oname}/m{i}"] = m
                    blobs[f"opt/{oname}/v{i}"] = v
        ckpt.save_checkpoint(path, meta, blobs)

    def _net_map(self) -> dict[str, Module]:
        return {
            "g1": self.g1,
            "d1": self.d1,
            "g2": self.g2,
            "d2": self.d2,
            "init_g1": self.init_g1,
            "init_d1": self.init_d1,
            "init_g2": self.init_g2,
            "init_d2": self.init_d2,
        }

    @classmethod
    def load(cls, path) -> "PipelineState":
        meta, digest, blobs = ckpt.load_checkpoint(path)
        if meta.get("kind") != "hairstudio-pipeline":
            raise ValueError("not a pipeline checkpoint")
        cfg = RunConfig()
        from hairstudio.config import _merge

        _merge(cfg, meta["config"])
        state = cls(cfg)
        for prefix, net in state._net_map().items():
            sub = {
                name[len(prefix) + 1 :]: arr
                for name, arr in blobs.items()
                if name.startswith(prefix + "/")
            }
            net.load_state_dict(sub)
        state.phase = meta["phase"]
        state.init_phase = meta["init_phase"]
        state.phase_digests = dict(meta["phase_digests"])
        state.checkpoint_digest = digest
        return state


# -- inference ----------------------------------------------------------------


def _forward_two_stage(g1: Generator, g2: Generator, x1: np.ndarray, mask_plane: np.ndarray, masked_rgb: np.ndarray):
    t0 = time.perf_counter()
    fake1 = g1(Tensor(x1[None]))
    t1 = time.perf_counter()
    x2 = np.concatenate([fake1.data[0], mask_plane[None], masked_rgb], axis=0).astype(np.float32)
    fake2 = g2(Tensor(x2[None]))
    t2 = time.perf_counter()
    timings = {"stage1_ms": (t1 - t0) * 1e3, "stage2_ms": (t2 - t1) * 1e3}
    return fake1.data[0], fake2.data[0], timings


def _check_inference_inputs(image: RasterImage, mask: MaskImage):
    if (image.width, image.height) != (mask.width, mask.height):
        raise ValueError("image and mask extents differ")
    if mask.is_empty():
        raise ValueError("mask is empty; nothing to synthesize")


def synthesize_with_timing(
    state: PipelineState, image: RasterImage, mask: MaskImage, strokes: StrokeSet
) -> tuple[RasterImage, dict]:
    """Full two-stage synthesis; returns the image plus per-stage timings."""
    if state.phase == "untrained":
        raise UntrainedError("pipeline has not been trained")
    _check_inference_inputs(image, mask)
    raster = rasterize_strokes(strokes, mask)
    x1 = _to_net(build_stage1_input(mask, raster))
    rgb = image.rgb().astype(np.float32)
    m = mask.data.astype(np.float32)
    masked = _to_net((rgb * (1.0 - m[:, :, None])).transpose(2, 0, 1))
    mask_plane = _to_net(m)
    _, out, timings = _forward_two_stage(state.g1, state.g2, x1, mask_plane, masked)
    return RasterImage(_from_net(out).transpose(1, 2, 0)), timings


def synthesize(state: PipelineState, image: RasterImage, mask: MaskImage, strokes: StrokeSet) -> RasterImage:
    return synthesize_with_timing(state, image, mask, strokes)[0]


def synthesize_init(state: PipelineState, image: RasterImage, mask: MaskImage, mean_color) -> RasterImage:
    """Conditional inpainting: synthesize from mask shape and a fill color."""
    if state.init_phase == "untrained":
        raise UntrainedError("init networks have not been trained")
    _check_inference_inputs(image, mask)
    x1 = _to_net(build_init_input(mask, mean_color))
    rgb = image.rgb().astype(np.float32)
    m = mask.data.astype(np.float32)
    masked = _to_net((rgb * (1.0 - m[:, :, None])).transpose(2, 0, 1))
    _, out, _ = _forward_two_stage(state.init_g1, state.init_g2, x1, _to_net(m), masked)
    return RasterImage(_from_net(out).transpose(1, 2, 0))


# -- training ------------------------------------------------------------------


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for i in range(0, n, batch_size):
        yield order[i : i + batch_size]


def _gan_step(
    g: Generator,
    d: Discriminator,
    proxy: PerceptualProxy,
    opt_g: Adam,
    opt_d: Adam,
    x: Tensor,
    target: Tensor,
    l1_weights: np.ndarray,
    cfg: LossConfig,
    adversarial: bool,
    perceptual: bool,
) -> dict[str, float]:
    fake = g(x)
    if adversarial:
        d_real = bce_with_logits(d(x, target), 1.0)
        d_fake = bce_with_logits(d(x, fake.detach()), 0.0)
        d_loss = d_real + d_fake
        opt_d.zero_grad()
        d_loss.backward()
        opt_d.step()
        adv_g = bce_with_logits(d(x, fake), 1.0)  # fresh pass through updated D
    else:
        adv_g = Tensor(np.zeros((), dtype=np.float32))
        d_loss = adv_g
    l1 = weighted_l1(fake, target, l1_weights)
    total = l1 * cfg.l1_weight + adv_g * cfg.adv_weight
    per_val = 0.0
    if perceptual:
        per = perceptual_distance(proxy, fake, target)
        total = total + per * cfg.perceptual_weight
        per_val = float(per.data)
    opt_g.zero_grad()
    total.backward()
    opt_g.step()
    return {
        "l1": float(l1.data),
        "adversarial": float(adv_g.data),
        "perceptual": per_val,
        "d": float(d_loss.data),
        "total": float(total.data),
    }


def _write_curves(log_dir, name: str, rows: list[dict]):
    if log_dir is None or not rows:
        return
    path = Path(log_dir)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / f"losses_{name}.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["epoch"] + [k for k in rows[0] if k != "epoch"])
        writer.writeheader()
        writer.writerows(rows)


def train_stage1(
    state: PipelineState,
    tset: TrainingSet,
    schedule: TrainSchedule | None = None,
    variant: str = "stroke",
    phase: str = "pretrain-synthetic",
    adversarial: bool = True,
    perceptual: bool = True,
    log_dir=None,
    label: str | None = None,
) -> list[dict]:
    """Alternating G1/D1 updates on the initial-synthesis objective.

    The L1 term supervises only the segmented region. Returns per-epoch
    mean loss components (also appended to ``state.history``).
    """
    if len(tset) == 0:
        raise ValueError("training set is empty")
    schedule = schedule or state.cfg.stage1
    g, d, _, _ = state.nets(variant)
    inputs = tset.x1 if variant == "stroke" else tset.x1_init
    opt_g = Adam(g.parameters(), schedule.lr, schedule.beta1, schedule.beta2, schedule.eps)
    opt_d = Adam(d.parameters(), schedule.lr, schedule.beta1, schedule.beta2, schedule.eps)
    rng = np.random.default_rng(state.cfg.seed + 101)
    curves = []
    for epoch in range(schedule.epochs):
        lr = schedule.lr_at(epoch)
        opt_g.lr = opt_d.lr = lr
        sums: dict[str, float] = {}
        count = 0
        for idx in _batches(len(tset), schedule.batch_size, rng):
            w = l1_region_weights(tset.masks[idx], None, state.cfg.loss, "initial")
            comps = _gan_step(
                g, d, state.proxy, opt_g, opt_d,
                Tensor(inputs[idx]), Tensor(tset.target_region[idx]),
                w, state.cfg.loss, adversarial, perceptual,
            )
            for k, v in comps.items():
                sums[k] = sums.get(k, 0.0) + v
            count += 1
        row = {"epoch": epoch, "lr": lr, **{k: v / count for k, v in sums.items()}}
        curves.append(row)
    state._advance(phase, variant)
    key = label or f"{variant}-stage1-{phase}"
    state.history[key] = curves
    _write_curves(log_dir, key, curves)
    return curves


def _stage2_input_tensor(fake1: Tensor, tset: TrainingSet, idx) -> Tensor:
    from hairstudio.nn import tensor as T

    mask_planes = _to_net(tset.masks[idx].astype(np.float32))[:, None]
    return T.concat([fake1, Tensor(mask_planes), Tensor(tset.masked_rgb[idx])], axis=1)


def train_end_to_end(
    state: PipelineState,
    tset: TrainingSet,
    schedule: TrainSchedule | None = None,
    variant: str = "stroke",
    adversarial: bool = True,
    perceptual: bool = True,
    train_d1: bool = True,
    stage1_loss: bool = True,
    log_dir=None,
    label: str | None = None,
) -> list[dict]:
    """Joint training of both stages with per-stage losses summed.

    Gradient flows into G1 both through the stage-2 input and (by
    default) the stage-1 loss. Requires a completed stage-1 phase.
    """
    if len(tset) == 0:
        raise ValueError("training set is empty")
    state.require_digest(("pretrain-synthetic", "refine-real"), variant)
    schedule = schedule or state.cfg.end_to_end
    g1, d1, g2, d2 = state.nets(variant)
    inputs = tset.x1 if variant == "stroke" else tset.x1_init
    opt_g = Adam(g1.parameters() + g2.parameters(), schedule.lr, schedule.beta1, schedule.beta2, schedule.eps)
    opt_d1 = Adam(d1.parameters(), schedule.lr, schedule.beta1, schedule.beta2, schedule.eps)
    opt_d2 = Adam(d2.parameters(), schedule.lr, schedule.beta1, schedule.beta2, schedule.eps)
    rng = np.random.default_rng(state.cfg.seed + 202)
    cfg = state.cfg.loss
    curves = []
    for epoch in range(schedule.epochs):
        lr = schedule.lr_at(epoch)
        opt_g.lr = opt_d1.lr = opt_d2.lr = lr
        sums: dict[str, float] = {}
        count = 0
        for idx in _batches(len(tset), schedule.batch_size, rng):
            x1 = Tensor(inputs[idx])
            target1 = Tensor(tset.target_region[idx])
            target2 = Tensor(tset.target_full[idx])
            fake1 = g1(x1)
            x2 = _stage2_input_tensor(fake1, tset, idx)
            fake2 = g2(x2)
            if adversarial:
                if train_d1:
                    dr1 = bce_with_logits(d1(x1, target1), 1.0)
                    df1 = bce_with_logits(d1(x1, fake1.detach()), 0.0)
                    opt_d1.zero_grad()
                    (dr1 + df1).backward()
                    opt_d1.step()
                x2_const = x2.detach()
                dr2 = bce_with_logits(d2(x2_const, target2), 1.0)
                df2 = bce_with_logits(d2(x2_const, fake2.detach()), 0.0)
                opt_d2.zero_grad()
                (dr2 + df2).backward()
                opt_d2.step()
                adv1 = bce_with_logits(d1(x1, fake1), 1.0)
                adv2 = bce_with_logits(d2(x2, fake2), 1.0)
            else:
                adv1 = Tensor(np.zeros((), dtype=np.float32))
                adv2 = Tensor(np.zeros((), dtype=np.float32))
            w2 = l1_region_weights(tset.masks[idx], tset.bands[idx], cfg, "composite")
            l12 = weighted_l1(fake2, target2, w2)
            total = l12 * cfg.l1_weight + adv2 * cfg.adv_weight
            l11_val = 0.0
            if stage1_loss:
                w1 = l1_region_weights(tset.masks[idx], None, cfg, "initial")
                l11 = weighted_l1(fake1, target1, w1)
                total = total + l11 * cfg.l1_weight + adv1 * cfg.adv_weight
                l11_val = float(l11.data)
                if perceptual:
                    total = total + perceptual_distance(state.proxy, fake1, target1) * cfg.perceptual_weight
            if perceptual:
                total = total + perceptual_distance(state.proxy, fake2, target2) * cfg.perceptual_weight
            opt_g.zero_grad()
            total.backward()
            opt_g.step()
            comps = {
                "l1_stage2": float(l12.data),
                "l1_stage1": l11_val,
                "adv_stage2": float(adv2.data),
                "total": float(total.data),
            }
            for k, v in comps.items():
                sums[k] = sums.get(k, 0.0) + v
            count += 1
        curves.append({"epoch": epoch, "lr": lr, **{k: v / count for k, v in sums.items()}})
    state._advance("end-to-end", variant)
    key = label or f"{variant}-end-to-end"
    state.history[key] = curves
    _write_curves(log_dir, key, curves)
    return curves


# -- evaluation helpers ---------------------------------------------------------


def stage1_validation_l1(state: PipelineState, tset: TrainingSet, variant: str = "stroke") -> float:
    """Mean |G1(x) - target| inside the mask over a validation set."""
    g = state.nets(variant)[0]
    inputs = tset.x1 if variant == "stroke" else tset.x1_init
    total, weight = 0.0, 0.0
    for i in range(len(tset)):
        fake = g(Tensor(inputs[i : i + 1])).data[0]
        diff = np.abs(fake - tset.target_region[i])
        m = tset.masks[i].astype(bool)
        total += diff[:, m].sum()
        weight += 3 * m.sum()
    return total / weight


def compositing_deviation(state: PipelineState, tset: TrainingSet, morph_kernel: int = 10) -> float:
    """Mean abs deviation from the input outside dilate(mask, kernel), in [0, 1] units."""
    devs = []
    for i in range(len(tset)):
        _, out, _ = _forward_two_stage(
            state.g1, state.g2, tset.x1[i], _to_net(tset.masks[i].astype(np.float32)), tset.masked_rgb[i]
        )
        outside = dilate(MaskImage(tset.masks[i]), morph_kernel).data == 0
        target = _from_net(tset.target_full[i])
        got = _from_net(out)
        devs.append(np.abs(got - target)[:, outside].mean())
    return float(np.mean(devs))


# -- ablation harness -----------------------------------------------------------


ABLATION_VARIANTS = (
    "translation-baseline",
    "single-network",
    "no-gan",
    "no-perceptual",
    "no-synth-pretrain",
    "synthetic-only",
    "full",
)


def _train_single_network(
    cfg: RunConfig, tset: TrainingSet, schedule: TrainSchedule, adversarial: bool, perceptual: bool, composite_weights: bool, seed: int
):
    """One encoder-decoder doing synthesis + compositing in a single shot."""
    rng = np.random.default_rng(seed)
    in_ch = STAGE1_CHANNELS + 3  # mask + strokes + masked target
    g = Generator(in_ch, cfg.model.base_width, cfg.model.depth, rng=rng)
    d = Discriminator(in_ch, 3, cfg.model.base_width, cfg.model.depth, rng=rng)
    proxy = PerceptualProxy()
    opt_g = Adam(g.parameters(), schedule.lr, schedule.beta1)
    opt_d = Adam(d.parameters(), schedule.lr, schedule.beta1)
    brng = np.random.default_rng(seed + 7)
    inputs = np.concatenate([tset.x1, tset.masked_rgb], axis=1)
    for epoch in range(schedule.epochs):
        lr = schedule.lr_at(epoch)
        opt_g.lr = opt_d.lr = lr
        for idx in _batches(len(tset), schedule.batch_size, brng):
            if composite_weights:
                w = l1_region_weights(tset.masks[idx], tset.bands[idx], cfg.loss, "composite")
            else:
                w = np.ones_like(tset.masks[idx], dtype=np.float64)
            _gan_step(
                g, d, proxy, opt_g, opt_d,
                Tensor(inputs[idx]), Tensor(tset.target_full[idx]),
                w, cfg.loss, adversarial, perceptual,
            )
    return g


def _single_network_outputs(g: Generator, tset: TrainingSet) -> list[RasterImage]:
    outs = []
    inputs = np.concatenate([tset.x1, tset.masked_rgb], axis=1)
    for i in range(len(tset)):
        out = g(Tensor(inputs[i : i + 1])).data[0]
        outs.append(RasterImage(_from_net(out).transpose(1, 2, 0)))
    return outs


def _two_stage_outputs(state: PipelineState, tset: TrainingSet) -> list[RasterImage]:
    outs = []
    for i in range(len(tset)):
        _, out, _ = _forward_two_stage(
            state.g1, state.g2, tset.x1[i], _to_net(tset.masks[i].astype(np.float32)), tset.masked_rgb[i]
        )
        outs.append(RasterImage(_from_net(out).transpose(1, 2, 0)))
    return outs


def _targets(tset: TrainingSet) -> list[RasterImage]:
    return [RasterImage(_from_net(tset.target_full[i]).transpose(1, 2, 0)) for i in range(len(tset))]


def ablation_variants(
    cfg: RunConfig,
    synth_train: TrainingSet,
    real_train: TrainingSet,
    real_eval: TrainingSet,
    stage1_schedule: TrainSchedule,
    e2e_schedule: TrainSchedule,
):
    """Train the seven ablation variants under one budget and score them.

    Returns a :class:`hairstudio.metrics.MetricReport` with one row per
    variant, columns l1/perceptual/mse/psnr/ssim/fid, evaluated on the
    held-out real-domain set.
    """
    from hairstudio.metrics import MetricReport, evaluate_pairs

    proxy = PerceptualProxy()
    targets = _targets(real_eval)
    report = MetricReport(sample_count=len(real_eval), seed=cfg.seed)

    # 1. prior image-to-image translation baseline: one net, L1 + GAN, no
    #    perceptual loss, no region gains, real data only
    g = _train_single_network(cfg, real_train, stage1_schedule, True, False, False, cfg.seed + 11)
    report.add_row("translation-baseline", evaluate_pairs(_single_network_outputs(g, real_eval), targets, proxy))

    # 2. single network with the full objective
    g = _train_single_network(cfg, real_train, stage1_schedule, True, True, True, cfg.seed + 12)
    report.add_row("single-network", evaluate_pairs(_single_network_outputs(g, real_eval), targets, proxy))

    # 3/4. full two-stage with one loss term removed
    for name, adv, per in (("no-gan", False, True), ("no-perceptual", True, False)):
        state = PipelineState(cfg)
        train_stage1(state, synth_train, stage1_schedule, adversarial=adv, perceptual=per)
        train_end_to_end(state, real_train, e2e_schedule, adversarial=adv, perceptual=per)
        report.add_row(name, evaluate_pairs(_two_stage_outputs(state, real_eval), targets, proxy))

    # 5. no synthetic pretraining: both phases on real data
    state = PipelineState(cfg)
    train_stage1(state, real_train, stage1_schedule)
    train_end_to_end(state, real_train, e2e_schedule)
    report.add_row("no-synth-pretrain", evaluate_pairs(_two_stage_outputs(state, real_eval), targets, proxy))

    # 6. synthetic only: never sees the real domain
    state = PipelineState(cfg)
    train_stage1(state, synth_train, stage1_schedule)
    train_end_to_end(state, synth_train, e2e_schedule)
    report.add_row("synthetic-only", evaluate_pairs(_two_stage_outputs(state, real_eval), targets, proxy))

    # 7. full pipeline: synthetic pretrain, end-to-end on real
    state = PipelineState(cfg)
    train_stage1(state, synth_train, stage1_schedule)
    train_end_to_end(state, real_train, e2e_schedule)
    report.add_row("full", evaluate_pairs(_two_stage_outputs(state, real_eval), targets, proxy))

    return report, state
