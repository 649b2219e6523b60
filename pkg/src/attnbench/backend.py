"""Kernel backend selection.

The compiled extension (``attnbench._core``) is preferred when it
imports cleanly; otherwise the pure-Python fallback is used. Set
``ATTNBENCH_BACKEND=py`` or ``=c`` to force a choice — forcing ``c``
raises immediately if the extension is missing, so benchmark runs can
never silently fall back to the slow path.
"""

import os

from . import _kernels_py

_requested = os.environ.get("ATTNBENCH_BACKEND", "auto").lower()

if _requested not in ("auto", "c", "py"):
    raise ImportError(f"ATTNBENCH_BACKEND must be auto, c or py, got {_requested!r}")

if _requested == "py":
    kernels = _kernels_py
else:
    try:
        from . import _core as kernels  # type: ignore[no-redef]
    except ImportError:
        if _requested == "c":
            raise ImportError(
                "ATTNBENCH_BACKEND=c but the compiled core is not built; "
                "run `pip install -e . --no-build-isolation` or "
                "`python setup.py build_ext --inplace`"
            ) from None
        kernels = _kernels_py

BACKEND = kernels.NAME


def has_compiled_core() -> bool:
    return BACKEND == "c"
