"""Hot-loop kernels with a compiled core and a pure-Python twin.

The compiled extension is preferred; set DORVAL_PURE_PYTHON=1 to force the
fallback. Both backends are bit-identical (enforced by the parity tests),
so results never depend on which one loaded.
"""

import os

from . import _fallback

if os.environ.get("DORVAL_PURE_PYTHON"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _speedups as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

rect_clearance = _impl.rect_clearance
clearance_profile = _impl.clearance_profile
rasterize_rect = _impl.rasterize_rect
raycast_first_hit = _impl.raycast_first_hit
ray_cells = _impl.ray_cells

__all__ = [
    "BACKEND",
    "rect_clearance",
    "clearance_profile",
    "rasterize_rect",
    "raycast_first_hit",
    "ray_cells",
]
