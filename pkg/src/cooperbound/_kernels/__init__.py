"""Hot-loop kernels: compiled extension when built, Python fallback otherwise.

Set ``COOPERBOUND_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels as python

if os.environ.get("COOPERBOUND_PURE_PYTHON", "") not in ("", "0"):
    compiled = None
else:
    try:
        from . import _ckernels as compiled
    except ImportError:  # extension not built
        compiled = None

active = compiled if compiled is not None else python

hopping_entries = active.hopping_entries
fill_hopping = active.fill_hopping
gauge_sweep = active.gauge_sweep
BACKEND = active.NAME
