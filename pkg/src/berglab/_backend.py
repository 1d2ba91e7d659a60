"""Backend selection: compiled kernels when available, numpy fallback otherwise.

Set ``BERGLAB_FORCE_PY=1`` to force the fallback (used by the benchmark and
the parity tests).  Both backends are deterministic run to run; they may
differ from each other in the last bits of compensated sums.
"""

import os

from . import _kernels_py

if os.environ.get("BERGLAB_FORCE_PY", "") == "1":
    kernels = _kernels_py
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_py

BACKEND = kernels.BACKEND_NAME


def get_kernels(force=None):
    """Return the kernel module; force="python"/"cython" overrides selection."""
    if force is None:
        return kernels
    if force == "python":
        return _kernels_py
    if force == "cython":
        from . import _kernels  # raises ImportError if not built

        return _kernels
    raise ValueError(f"unknown backend {force!r}")
