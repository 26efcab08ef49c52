"""Kernel backend selection.

The compiled extension handles float32 only; float64 calls (the gradient
verification path) always go to the numpy kernels. Selection happens at
import time and can be forced with OPGAN_BACKEND=auto|compiled|numpy.
"""

import os

import numpy as np

from . import _kernels_np
from .errors import ConfigurationError

_VALID = ("auto", "compiled", "numpy")
_requested = os.environ.get("OPGAN_BACKEND", "auto")
if _requested not in _VALID:
    raise ConfigurationError(
        f"OPGAN_BACKEND must be one of {_VALID}, got {_requested!r}"
    )

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

if _requested == "compiled" and _compiled is None:
    raise ConfigurationError(
        "OPGAN_BACKEND=compiled but the opgan._kernels extension is not built"
    )

_use_compiled = _compiled is not None and _requested != "numpy"


def backend_name():
    return "compiled" if _use_compiled else "numpy"


def compiled_available():
    return _compiled is not None


def conv_fwd(xp, w, stride):
    if _use_compiled and xp.dtype == np.float32:
        return _compiled.conv_fwd(xp, w, stride)
    return _kernels_np.conv_fwd(xp, w, stride)


def conv_bwd_x(dout, w, stride, lp):
    if _use_compiled and dout.dtype == np.float32:
        return _compiled.conv_bwd_x(dout, w, stride, lp)
    return _kernels_np.conv_bwd_x(dout, w, stride, lp)


def conv_bwd_w(dout, xp, k, stride):
    if _use_compiled and dout.dtype == np.float32:
        return _compiled.conv_bwd_w(dout, xp, k, stride)
    return _kernels_np.conv_bwd_w(dout, xp, k, stride)
