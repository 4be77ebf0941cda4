"""Kernel backend selection.

Two interchangeable kernel sets exist: the compiled extension (``ext``) and
the portable numpy fallback (``python``). Selection happens once at import:

  CHARLM_KERNELS=python  force the numpy fallback
  CHARLM_KERNELS=ext     require the extension (ImportError if missing)
  unset / auto           use the extension when built, else fall back
"""

import os

from . import python_kernels

_choice = os.environ.get("CHARLM_KERNELS", "auto").lower()

if _choice == "python":
    kernels = python_kernels
elif _choice == "ext":
    from . import ext_kernels
    kernels = ext_kernels
else:
    try:
        from . import ext_kernels
        kernels = ext_kernels
    except ImportError:
        kernels = python_kernels


def active_kernels():
    """Name of the kernel set in use: 'ext' or 'python'."""
    return kernels.NAME
