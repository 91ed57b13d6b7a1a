"""Self-contained tensor/autodiff stack and the synthesis model zoo."""

from hairstudio.nn.tensor import (
    NonFiniteError,
    Tensor,
    concat,
    conv2d,
    instance_norm,
    leaky_relu,
    relu,
    set_nan_guard,
    softplus,
    tanh,
    upsample_nearest2,
)
from hairstudio.nn.layers import Conv2d, InstanceNorm2d, Module, Sequential
from hairstudio.nn.models import (
    Discriminator,
    Generator,
    PerceptualProxy,
    count_parameters,
)
from hairstudio.nn.losses import (
    AdversarialLosses,
    adversarial_losses,
    bce_with_logits,
    perceptual_distance,
    total_loss,
    weighted_l1,
)
from hairstudio.nn.optim import Adam
from hairstudio.nn import checkpoint

__all__ = [
    "Tensor",
    "NonFiniteError",
    "set_nan_guard",
    "concat",
    "conv2d",
    "instance_norm",
    "leaky_relu",
    "relu",
    "softplus",
    "tanh",
    "upsample_nearest2",
    "Module",
    "Conv2d",
    "InstanceNorm2d",
    "Sequential",
    "Generator",
    "Discriminator",
    "PerceptualProxy",
    "count_parameters",
    "AdversarialLosses",
    "adversarial_losses",
    "bce_with_logits",
    "perceptual_distance",
    "total_loss",
    "weighted_l1",
    "Adam",
    "checkpoint",
]
