"""Numba acceleration switch.

Hot numeric kernels ship in two builds: a numba ``@njit`` version and a
pure-numpy version with identical semantics.  The JIT build is used when
numba imports cleanly, unless the environment variable ``TRILOOP_NO_NUMBA``
is set to a non-empty value (any value other than ``0``), in which case the
numpy path is forced.  ``USE_NUMBA`` is resolved once at import time so a
process runs one path consistently.
"""

import os

_disabled = os.environ.get("TRILOOP_NO_NUMBA", "") not in ("", "0")

if _disabled:
    HAS_NUMBA = False
else:
    try:
        from numba import njit  # noqa: F401

        HAS_NUMBA = True
    except ImportError:
        HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA


def backend_name() -> str:
    """Name of the active kernel backend: ``"numba"`` or ``"numpy"``."""
    return "numba" if USE_NUMBA else "numpy"
