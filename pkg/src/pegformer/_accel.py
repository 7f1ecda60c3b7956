"""Backend switch for the compiled kernels.

Set ``PEGFORMER_NUMBA=0`` to force the pure-numpy path. Numba is used
whenever it imports and the flag is not disabled.
"""
from __future__ import annotations

import os

_flag = os.environ.get("PEGFORMER_NUMBA", "1").strip().lower()
_requested = _flag not in ("0", "false", "no", "off")

try:
    if not _requested:
        raise ImportError
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _requested


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, otherwise a no-op decorator."""
    if USE_NUMBA:
        import numba

        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]
    return lambda f: f


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
