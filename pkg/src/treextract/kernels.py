"""Backend selection for the tree kernels.

The compiled extension is used when importable; set
``TREEXTRACT_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

if os.environ.get("TREEXTRACT_PURE_PYTHON"):
    from . import _pykernels as _impl
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        from . import _pykernels as _impl

BACKEND = _impl.BACKEND
predict_batch = _impl.predict_batch
best_split = _impl.best_split
