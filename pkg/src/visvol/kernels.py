"""Kernel backend selection.

The compiled ``_accel`` extension is used when importable; otherwise the
numpy implementation in ``_kernels_py`` is used. Set ``VISVOL_PURE_PYTHON=1``
to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("VISVOL_PURE_PYTHON", "") not in ("", "0"):
    impl = _kernels_py
else:
    try:
        from . import _accel as impl
    except ImportError:  # extension not built
        impl = _kernels_py

BACKEND = impl.NAME


def available():
    """All importable kernel implementations, keyed by name."""
    out = {"python": _kernels_py}
    try:
        from . import _accel
    except ImportError:
        pass
    else:
        out["cython"] = _accel
    return out
