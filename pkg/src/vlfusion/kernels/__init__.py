"""Hot numerical kernels with a compiled backend and a pure-Python fallback.

The compiled extension (``_ckernels``, built from Cython) is used when it
imports; otherwise the numpy/pure-Python versions in ``_pykernels`` are used.
Set ``VLFUSION_PURE_PYTHON=1`` to force the fallback.

Kernels
-------
lsa_min
    Dense Hungarian solver returning the assignment and dual potentials.
iou_matrix
    Pairwise IoU between two box arrays.
bin_events
    Event counting into a (2, T, h, w) tensor.
project_points
    Pinhole (+ Brown-Conrady) projection of camera-frame points.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("VLFUSION_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

lsa_min = _impl.lsa_min
iou_matrix = _impl.iou_matrix
bin_events = _impl.bin_events
project_points = _impl.project_points

__all__ = ["BACKEND", "lsa_min", "iou_matrix", "bin_events", "project_points"]
