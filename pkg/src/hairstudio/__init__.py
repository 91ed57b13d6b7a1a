"""Interactive stroke-guided hair synthesis.

The package is organized as a set of small, composable layers:

* :mod:`hairstudio.imagecore` -- pixel containers, binary morphology,
  boundary bands, and alpha compositing.
* :mod:`hairstudio.flowfield` -- structure-tensor orientation fields,
  line integral convolution, and field brushes.
* :mod:`hairstudio.strokes` -- guide-stroke tracing, colorization,
  rasterization, and automatic annotation.
* :mod:`hairstudio.synthdata` -- procedural fiber-image dataset generator
  and ingestion of user-supplied segmented corpora.
* :mod:`hairstudio.nn` -- self-contained tensor/autodiff stack, the
  generator/discriminator model zoo, losses, and the Adam optimizer.
* :mod:`hairstudio.pipeline` -- two-stage synthesis, training schedules,
  and the ablation harness.
* :mod:`hairstudio.metrics` -- L1/MSE/PSNR/SSIM/perceptual/Frechet
  evaluation suite.
* :mod:`hairstudio.session` / :mod:`hairstudio.service` /
  :mod:`hairstudio.cli` -- interactive editing sessions, the local HTTP
  service, and the command-line driver.
* :mod:`hairstudio.estimators` -- sklearn-style facades (``fit`` /
  ``transform`` / ``predict``) over the core algorithms.
"""

from hairstudio.imagecore import MaskImage, RasterImage
from hairstudio.flowfield import OrientationField
from hairstudio.strokes import GuideStroke, StrokeSet

__version__ = "0.1.0"

__all__ = [
    "MaskImage",
    "RasterImage",
    "OrientationField",
    "GuideStroke",
    "StrokeSet",
    "__version__",
]
