"""Kernel backend chosen at import time.

The compiled ``_ckernels`` extension is used when it imports; otherwise, or
when ``ACTIVE_SYSID_PURE_PYTHON`` is set to a non-empty value, the numpy
versions in ``_pykernels`` are used. ``BACKEND`` names the active one.
"""
import os

from . import _pykernels

if os.environ.get("ACTIVE_SYSID_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

rank_one_update = _impl.rank_one_update
quad_form = _impl.quad_form
box_vertex_argmax = _impl.box_vertex_argmax
box_cd_argmin = _impl.box_cd_argmin
flip_ascent = _impl.flip_ascent


def available_backends() -> dict:
    """Map of backend name to module for every importable backend."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
