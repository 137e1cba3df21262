"""Backend dispatch for the hot kernels.

MVMEDIAN_BACKEND=auto|numba|numpy picks the implementation at import time.
auto prefers numba and falls back to numpy when numba is not importable;
numba insists and raises; numpy forces the pure-numpy path.
"""
import os

_choice = os.environ.get("MVMEDIAN_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(
        "MVMEDIAN_BACKEND must be auto, numba or numpy, got %r" % _choice
    )

if _choice in ("auto", "numba"):
    try:
        from . import numba_impl as _impl
        _backend_name = "numba"
    except ImportError:
        if _choice == "numba":
            raise
        from . import numpy_impl as _impl
        _backend_name = "numpy"
else:
    from . import numpy_impl as _impl
    _backend_name = "numpy"

oja_eval_2d = _impl.oja_eval_2d
tukey_depth_2d = _impl.tukey_depth_2d
rank_filter_2d = _impl.rank_filter_2d
amoeba_distances = _impl.amoeba_distances
chs_peel_2d = _impl.chs_peel_2d


def active_backend():
    return _backend_name
