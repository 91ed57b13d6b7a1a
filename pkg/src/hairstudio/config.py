"""Shared defaults and structured-text (JSON) config loading.

Every tunable the algorithms rely on lives here so runs are reproducible
from a single file: field-extraction scales, stroke annotation settings,
loss weights, and training schedules.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field as dc_field

__all__ = [
    "FieldConfig",
    "StrokeConfig",
    "LossConfig",
    "TrainSchedule",
    "ModelConfig",
    "RunConfig",
    "PALETTES",
    "load_config",
    "save_config",
]

# palette centers for the 8 procedural hair colors (RGB in [0, 1])
PALETTES: dict[int, tuple[str, tuple[float, float, float]]] = {
    0: ("black", (0.08, 0.07, 0.07)),
    1: ("dark-brown", (0.23, 0.15, 0.09)),
    2: ("brown", (0.38, 0.25, 0.13)),
    3: ("auburn", (0.46, 0.21, 0.11)),
    4: ("red", (0.62, 0.28, 0.14)),
    5: ("blond", (0.76, 0.62, 0.38)),
    6: ("gray", (0.58, 0.57, 0.55)),
    7: ("white", (0.88, 0.87, 0.84)),
}


@dataclass
class FieldConfig:
    """Structure-tensor and LIC scales (pixels)."""

    sigma_grad: float = 1.0
    sigma_smooth: float = 2.0
    tau_coherence: float = 0.05
    lic_step: float = 0.5
    color_lic_halflen: int = 4


@dataclass
class StrokeConfig:
    """Automatic guide-stroke annotation settings."""

    density: float = 4.0  # strokes per 1000 masked pixels
    width: float = 2.0
    alpha: float = 0.9
    min_len: float = 15.0
    max_len: float = 60.0
    step: float = 0.5
    spacing_factor: float = 0.6  # seed min-distance as a fraction of sqrt(area/n)


@dataclass
class LossConfig:
    """Weights for the composite synthesis loss and its region gains."""

    l1_weight: float = 50.0
    adv_weight: float = 1.0
    perceptual_weight: float = 0.1
    region_gain: float = 1.5
    boundary_gain: float = 1.5  # compounds with region_gain inside the band
    morph_kernel: int = 10

    def __post_init__(self):
        for name in ("l1_weight", "adv_weight", "perceptual_weight", "region_gain", "boundary_gain"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class TrainSchedule:
    """Adam schedule; the learning rate halves at 1/3 and 2/3 of the epochs."""

    epochs: int = 5
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 4

    def lr_at(self, epoch: int) -> float:
        m1 = -(-self.epochs // 3)  # ceil(epochs/3)
        m2 = -(-2 * self.epochs // 3)
        halvings = (epoch >= m1) + (epoch >= m2)
        return self.lr * (0.5**halvings)


@dataclass
class ModelConfig:
    """Desk-scale generator/discriminator geometry."""

    size: int = 64
    base_width: int = 16
    depth: int = 4


@dataclass
class RunConfig:
    field: FieldConfig = dc_field(default_factory=FieldConfig)
    strokes: StrokeConfig = dc_field(default_factory=StrokeConfig)
    loss: LossConfig = dc_field(default_factory=LossConfig)
    model: ModelConfig = dc_field(default_factory=ModelConfig)
    stage1: TrainSchedule = dc_field(default_factory=lambda: TrainSchedule(epochs=5, lr=2e-4, beta1=0.5))
    end_to_end: TrainSchedule = dc_field(default_factory=lambda: TrainSchedule(epochs=5, lr=1e-4, beta1=0.75))
    seed: int = 0


def _merge(dc, data: dict):
    names = {f.name: f for f in dataclasses.fields(dc)}
    for key, value in data.items():
        if key not in names:
            raise KeyError(f"unknown config key {key!r} for {type(dc).__name__}")
        current = getattr(dc, key)
        if dataclasses.is_dataclass(current):
            _merge(current, value)
        else:
            setattr(dc, key, type(current)(value) if current is not None else value)
    return dc


def load_config(path=None) -> RunConfig:
    """Load a JSON config, layering the file over the defaults."""
    cfg = RunConfig()
    if path is not None:
        with open(path) as f:
            _merge(cfg, json.load(f))
    return cfg


def save_config(cfg: RunConfig, path):
    with open(path, "w") as f:
        json.dump(dataclasses.asdict(cfg), f, indent=2, sort_keys=True)
        f.write("\n")
