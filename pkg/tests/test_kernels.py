"""The compiled and pure-Python kernels must agree."""

import numpy as np
import pytest

from oracles import brute_force_iou
from vlfusion import kernels
from vlfusion.kernels import _pykernels

try:
    from vlfusion.kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = [_pykernels] + ([_ckernels] if _ckernels is not None else [])
needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


def random_boxes(rng, n):
    xy = rng.uniform(0, 100, (n, 2))
    wh = rng.uniform(1, 50, (n, 2))
    return np.hstack([xy, xy + wh])


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("impl", BACKENDS)
def test_iou_matches_closed_form(impl, rng):
    a, b = random_boxes(rng, 7), random_boxes(rng, 5)
    np.testing.assert_allclose(impl.iou_matrix(a, b), brute_force_iou(a, b), atol=1e-12)


@pytest.mark.parametrize("impl", BACKENDS)
def test_lsa_min_optimal(impl, rng):
    from scipy.optimize import linear_sum_assignment

    for n, m in [(1, 1), (3, 5), (8, 8), (20, 31)]:
        c = rng.random((n, m))
        col4row, u, v = impl.lsa_min(c)
        r, cc = linear_sum_assignment(c)
        assert c[np.arange(n), col4row].sum() == pytest.approx(c[r, cc].sum(), abs=1e-10)
        # dual feasibility: reduced costs are non-negative
        assert np.all(c - u[:, None] - v[None, :] >= -1e-9)


@needs_ext
def test_backends_agree(rng):
    c = rng.random((9, 12))
    for x, y in zip(_pykernels.lsa_min(c), _ckernels.lsa_min(c)):
        np.testing.assert_allclose(x, y, atol=1e-12)
    a, b = random_boxes(rng, 10), random_boxes(rng, 6)
    np.testing.assert_array_equal(_pykernels.iou_matrix(a, b), _ckernels.iou_matrix(a, b))

    n = 5000
    args = (rng.integers(-2, 40, n), rng.integers(-2, 30, n), rng.uniform(-0.01, 0.06, n),
            rng.choice([-1, 1], n), 0.0, 0.05, 10, 30, 40)
    for x, y in zip(_pykernels.bin_events(*args), _ckernels.bin_events(*args)):
        np.testing.assert_array_equal(x, y)

    pts = rng.normal(0, 1, (500, 3)) + [0, 0, 1]
    kw = (400.0, 410.0, 320.0, 240.0, -0.2, 0.05, 0.001, 0.001, -0.002)
    for dist in (False, True):
        uv_p, ok_p = _pykernels.project_points(pts, *kw, dist)
        uv_c, ok_c = _ckernels.project_points(pts, *kw, dist)
        np.testing.assert_array_equal(ok_p, ok_c)
        np.testing.assert_allclose(uv_p[ok_p], uv_c[ok_c], rtol=0, atol=1e-9)
        assert np.all(np.isnan(uv_c[~ok_c]))
