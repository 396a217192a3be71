"""Encoder kernel selection.

The compiled extension is used when importable; setting the environment
variable ``SERVORIG_PURE_PYTHON=1`` forces the pure-Python fallback.
``IMPLEMENTATION`` names the active backend.
"""
import os

if os.environ.get("SERVORIG_PURE_PYTHON"):
    from servorig import _pykernels as _impl
    IMPLEMENTATION = "python"
else:
    try:
        from servorig import _ckernels as _impl
        IMPLEMENTATION = "cython"
    except ImportError:
        from servorig import _pykernels as _impl
        IMPLEMENTATION = "python"

edge_index = _impl.edge_index
channel_levels = _impl.channel_levels
drive_path = _impl.drive_path
drive_linear = _impl.drive_linear
campaign = _impl.campaign

__all__ = ["IMPLEMENTATION", "edge_index", "channel_levels", "drive_path",
           "drive_linear", "campaign"]
