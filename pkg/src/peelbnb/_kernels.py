"""Sweep-kernel backend selection.

Prefers the compiled extension and falls back to the pure-numpy
implementation.  ``PEELBNB_KERNEL=python`` (or ``cython``) forces a backend;
forcing ``cython`` raises if the extension is missing rather than silently
degrading a benchmark.
"""

from __future__ import annotations

import os

from . import _cd_py

_choice = os.environ.get("PEELBNB_KERNEL", "auto").lower()

if _choice == "python":
    _impl = _cd_py
    BACKEND = "python"
elif _choice == "cython":
    from . import _cd_fast as _impl  # noqa: F401

    BACKEND = "cython"
elif _choice == "auto":
    try:
        from . import _cd_fast as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _cd_py
        BACKEND = "python"
else:
    raise RuntimeError(f"PEELBNB_KERNEL must be auto, python or cython, got {_choice!r}")

cd_sweep = _impl.cd_sweep
update_coordinate = _impl.update_coordinate
peel_pass = _impl.peel_pass
dual_pivot_sums = _impl.dual_pivot_sums


def backend_name() -> str:
    """Which sweep kernel is active: 'cython' or 'python'."""
    return BACKEND
