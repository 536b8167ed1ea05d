"""Backend selection for the hot loops.

numba is used when it imports cleanly and ``WALKOPT_NUMBA`` is not set to a
false value (``0``, ``false``, ``no``, ``off``).  The pure-numpy module is
always importable and is what the fallback path runs.
"""

import importlib
import os

from . import numpy_kernels

_FALSE = {"0", "false", "no", "off"}


def _want_numba():
    return os.environ.get("WALKOPT_NUMBA", "1").strip().lower() not in _FALSE


numba_kernels = None
if _want_numba():
    try:
        numba_kernels = importlib.import_module(".numba_kernels", __name__)
    except ImportError:  # numba missing or broken: numpy path only
        numba_kernels = None

impl = numba_kernels if numba_kernels is not None else numpy_kernels
BACKEND = "numba" if numba_kernels is not None else "numpy"

walk_paths = impl.walk_paths
first_visits = impl.first_visits
cover_walk = impl.cover_walk
hit_and_run = impl.hit_and_run
ssp_value_iteration = impl.ssp_value_iteration
relative_value_iteration = impl.relative_value_iteration
barrier_subgradient = impl.barrier_subgradient

__all__ = [
    "BACKEND",
    "numpy_kernels",
    "numba_kernels",
    "walk_paths",
    "first_visits",
    "cover_walk",
    "hit_and_run",
    "ssp_value_iteration",
    "relative_value_iteration",
    "barrier_subgradient",
]
