"""Backend selection for the hot kernels.

The compiled extension is used when it imports; set ``BEAMLOC_PURE_PYTHON=1``
to force the NumPy fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("BEAMLOC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        pass

mixture_profile = _impl.mixture_profile
convolution_profile = _impl.convolution_profile
trm_series = _impl.trm_series

__all__ = ["BACKEND", "mixture_profile", "convolution_profile", "trm_series"]
