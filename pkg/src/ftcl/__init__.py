"""Weakly-supervised temporal action localization with fine-grained
sequence contrasting: differentiable DP kernels, a small attention
backbone, hand-derived gradients, training, inference and mAP evaluation.
"""

from ._kernels import backend_name
from .dp import (
    FsdInputs,
    FsdResult,
    LcsInputs,
    LcsResult,
    SmoothMaxMode,
    fsd_backward,
    fsd_forward,
    lcs_backward,
    lcs_forward,
    smooth_max,
    smooth_max_grad,
)

__version__ = "0.1.0"

__all__ = [
    "backend_name",
    "FsdInputs",
    "FsdResult",
    "LcsInputs",
    "LcsResult",
    "SmoothMaxMode",
    "fsd_backward",
    "fsd_forward",
    "lcs_backward",
    "lcs_forward",
    "smooth_max",
    "smooth_max_grad",
    "__version__",
]
