"""Kernel backend selection.

The compiled kernels are used when importable. Setting ``CRANBENCH_KERNELS=python``
forces the pure-Python fallback (``cython`` makes a missing extension an error).
"""

import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

ENV_VAR = "CRANBENCH_KERNELS"


def _select():
    wanted = os.environ.get(ENV_VAR, "auto").strip().lower()
    if wanted == "python":
        return _pykernels
    try:
        from . import _ckernels
    except ImportError as exc:
        if wanted == "cython":
            raise ImportError(f"{ENV_VAR}=cython but the compiled kernels are unavailable") from exc
        log.warning("compiled turbo kernels unavailable (%s); using Python fallback", exc)
        return _pykernels
    return _ckernels


kernels = _select()
BACKEND = kernels.NAME


def available_backends() -> dict:
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out
