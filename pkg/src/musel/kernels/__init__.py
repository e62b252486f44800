"""Hot simulation kernels with a compiled core and a pure-Python fallback.

The compiled extension (``musel.kernels._core``, built from Cython) and
``musel.kernels.fallback`` implement the same functions.  The compiled lane
is preferred when it imported cleanly; set ``MUSEL_PURE_PYTHON=1`` to force
the fallback (used by the lane-equivalence tests and the benchmark).
"""

import os

from . import fallback as _fallback
from .fallback import (  # noqa: F401  (shared constants and errors)
    EV_START, EV_STOP, EV_WALL_X, EV_WALL_Y, EV_DIAG, EV_DIAG_END, EV_HIT,
    EventCapError, diag_frame,
)

if os.environ.get("MUSEL_PURE_PYTHON"):
    _impl = _fallback
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _fallback

BACKEND = _impl.BACKEND

simulate_push = _impl.simulate_push
simulate_push_batch = _impl.simulate_push_batch
dense_push_batch = _impl.dense_push_batch
min_dist_batch = _impl.min_dist_batch
