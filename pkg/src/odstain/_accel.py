"""Backend selection for the hot kernels.

Set ``ODSTAIN_PURE_NUMPY=1`` to force the vectorised numpy path. Without the
flag the numba kernels are used whenever numba imports cleanly.
"""

import os

ENV_FLAG = "ODSTAIN_PURE_NUMPY"


def _flag_set(value):
    return value.strip().lower() in {"1", "true", "yes", "on"}


try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _flag_set(os.environ.get(ENV_FLAG, ""))
BACKEND = "numba" if USE_NUMBA else "numpy"
