"""Kernel selection.

The compiled ``_kernels`` extension is used when it imports; otherwise, or
when ``SPTMIPT_BACKEND=python`` is set, the numpy kernels in ``_pykernels``
are used. Both expose the same functions.
"""

import importlib
import os

from . import _pykernels


def _load(name):
    if name == "python":
        return _pykernels
    if name == "compiled":
        return importlib.import_module("sptmipt._kernels")
    raise ValueError(f"unknown backend {name!r}")


def _default():
    wanted = os.environ.get("SPTMIPT_BACKEND", "auto")
    if wanted != "auto":
        return _load(wanted)
    try:
        return _load("compiled")
    except ImportError:
        return _pykernels


kernels = _default()


def name():
    return "python" if kernels is _pykernels else "compiled"


def use(backend):
    """Switch the active kernels (``"compiled"`` or ``"python"``) for this process."""
    global kernels
    kernels = _load(backend)
    return kernels
