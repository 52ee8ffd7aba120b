"""Kernel backend selection.

The compiled module is used when it imports; set ``DDSDE_AVG_BACKEND=python``
to force the numpy fallback.
"""
import os

from . import _pykernels

if os.environ.get("DDSDE_AVG_BACKEND", "").lower() == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

stream_keys = _impl.stream_keys
normals = _impl.normals
uniforms = _impl.uniforms
power_kernel_sum = _impl.power_kernel_sum

# stream tags
TAG_NOISE = 0
TAG_INIT = 1
