"""Audio-visual saliency prediction toolkit.

From-scratch numpy autodiff engine, frequency-aware audio/video
encoders with cross-modal fusion, a saliency decoder, eye-fixation data
tooling, and the standard saliency evaluation metrics.
"""

from .config import ModelConfig, fixture_config, full_scale_config
from .model import SaliencyModel
from .tensor import Tape, Tensor, backward, precision, set_default_dtype

__version__ = "0.1.0"

__all__ = [
    "ModelConfig",
    "SaliencyModel",
    "Tape",
    "Tensor",
    "backward",
    "fixture_config",
    "full_scale_config",
    "precision",
    "set_default_dtype",
    "__version__",
]
