"""Backend selection for the trajectory kernel.

Prefers the compiled extension; falls back to the pure-Python twin when the
extension is missing or MARKOVNASH_PURE_PYTHON=1 is set.
"""

import os

if os.environ.get("MARKOVNASH_PURE_PYTHON"):
    from . import _pathkernel_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _pathkernel as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _pathkernel_py as _impl

        BACKEND = "python"

step_pairs = _impl.step_pairs


def backend_name() -> str:
    """Name of the active trajectory backend ("cython" or "python")."""
    return BACKEND
