"""Backend selection for the hot pixel kernels.

The environment variable ``FBFEP_BACKEND`` picks the implementation:
``numba`` (default when numba imports) or ``numpy``. The choice is made
once at import time; use :func:`fbfep.kernels.use_backend` to switch
inside a running process (benchmarks, tests).
"""

import logging
import os

logger = logging.getLogger(__name__)

ENV_VAR = "FBFEP_BACKEND"

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False


def requested_backend():
    name = os.environ.get(ENV_VAR, "").strip().lower()
    if name in ("", "auto"):
        return "numba" if HAS_NUMBA else "numpy"
    if name not in ("numba", "numpy"):
        raise ValueError(f"{ENV_VAR} must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not HAS_NUMBA:
        logger.warning("%s=numba requested but numba is not importable; using numpy", ENV_VAR)
        return "numpy"
    return name
