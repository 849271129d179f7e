"""Selects the compiled evaluation core, falling back to pure numpy.

Set TORUSCRIT_BACKEND=python to force the fallback (used by the parity
tests and the backend benchmark).
"""

import os

_forced = os.environ.get("TORUSCRIT_BACKEND", "").strip().lower()

if _forced == "python":
    from . import _kernels_py as _impl
elif _forced == "cython":
    from . import _kernels as _impl  # ImportError here is intentional: user asked for it
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        from . import _kernels_py as _impl

BACKEND_NAME = _impl.BACKEND_NAME
trig_jet = _impl.trig_jet
count_sign_changes = _impl.count_sign_changes


def available_backends():
    names = []
    try:
        from . import _kernels  # noqa: F401

        names.append("cython")
    except ImportError:
        pass
    names.append("python")
    return names


def get_backend(name):
    """Fetch a specific backend module by name (for benchmarks and tests)."""
    if name == "python":
        from . import _kernels_py

        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
