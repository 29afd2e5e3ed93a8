"""Kernel backend selection.

The compiled Cython extension is preferred when it imports; otherwise the
numpy implementations take over. ``RADEN_KERNELS=numpy|cython`` forces a
backend (forcing ``cython`` fails loudly if the extension is missing).
"""

from __future__ import annotations

import os

from . import _np

_choice = os.environ.get("RADEN_KERNELS", "auto").lower()

if _choice == "numpy":
    _impl = _np
elif _choice == "cython":
    from . import _cy as _impl  # noqa: F401  (ImportError is the intended failure)
else:
    try:
        from . import _cy as _impl
    except ImportError:
        _impl = _np

BACKEND: str = _impl.BACKEND

halfspace_counts = _impl.halfspace_counts
ball_counts = _impl.ball_counts
ball_pattern = _impl.ball_pattern
pattern_matvec = _impl.pattern_matvec
pattern_rmatvec = _impl.pattern_rmatvec


def available_backends():
    """Names of importable backends (always includes numpy)."""
    names = ["numpy"]
    try:
        from . import _cy  # noqa: F401

        names.append("cython")
    except ImportError:
        pass
    return names


def get_backend(name: str):
    """Module object for an explicit backend name (for tests/benchmarks)."""
    if name == "numpy":
        return _np
    if name == "cython":
        from . import _cy

        return _cy
    raise ValueError(f"unknown kernel backend {name!r}")
