"""Kernel dispatch: compiled Cython module when importable, numpy otherwise.

Set ``LFPSIM_PURE_PYTHON=1`` to force the numpy path.
"""
import os

from . import _kernels_py

BACKEND = "python"
solid_flux = _kernels_py.solid_flux
reaction = _kernels_py.reaction

if os.environ.get("LFPSIM_PURE_PYTHON", "") != "1":
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        solid_flux = _compiled.solid_flux
        reaction = _compiled.reaction


def backends():
    """Map of every importable backend name to its (solid_flux, reaction) pair."""
    out = {"python": (_kernels_py.solid_flux, _kernels_py.reaction)}
    try:
        from . import _kernels as compiled
    except ImportError:
        return out
    out["cython"] = (compiled.solid_flux, compiled.reaction)
    return out
