"""Sample-efficient active learning for action-effect regression.

Subpackages: ``env`` (push-physics tabletop), ``model`` (deep-kernel SVGP
regressor), ``uncertainty`` (selection-score components), ``loop`` (the
active-learning iterate), ``harness`` (experiment runner and analysis CLI).
"""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
