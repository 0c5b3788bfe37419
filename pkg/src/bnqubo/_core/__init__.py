"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
mirror.  Both produce identical reads for identical inputs.  Set
``BNQUBO_BACKEND=python`` to force the fallback.
"""

import os

from . import _fallback as python

try:
    from . import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

BACKENDS = {"python": python}
if compiled is not None:
    BACKENDS["compiled"] = compiled


def default_backend():
    forced = os.environ.get("BNQUBO_BACKEND")
    if forced:
        if forced not in BACKENDS:
            raise ImportError(f"BNQUBO_BACKEND={forced!r} is not available; have {sorted(BACKENDS)}")
        return BACKENDS[forced]
    return compiled if compiled is not None else python


def get_backend(name=None):
    if name is None:
        return default_backend()
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown kernel backend {name!r}; have {sorted(BACKENDS)}") from None
