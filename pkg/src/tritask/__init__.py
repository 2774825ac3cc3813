"""Joint salient-object, depth and contour prediction at desk scale.

The package is self-contained: a small reverse-mode tensor engine, the
multi-task encoder/decoder with transformer-based fusion, the loss stack,
the evaluation metric suite, and a train/eval/predict CLI.
"""

from .tensor import Tensor, set_default_dtype, set_finite_checks

__all__ = ["Tensor", "set_default_dtype", "set_finite_checks"]
__version__ = "0.1.0"
