# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, INFINITY

cnp.import_array()


def lsa_min(cost):
    cdef double[:, ::1] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0]
    cdef Py_ssize_t m = c.shape[1]
    if n > m:
        raise ValueError("lsa_min needs n_rows <= n_cols")
    u_arr = np.zeros(n + 1)
    v_arr = np.zeros(m + 1)
    p_arr = np.zeros(m + 1, dtype=np.intp)
    way_arr = np.zeros(m + 1, dtype=np.intp)
    minv_arr = np.empty(m + 1)
    used_arr = np.empty(m + 1, dtype=np.uint8)
    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef Py_ssize_t[::1] p = p_arr
    cdef Py_ssize_t[::1] way = way_arr
    cdef double[::1] minv = minv_arr
    cdef unsigned char[::1] used = used_arr
    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double delta, cur, ui0
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(m + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            ui0 = u[i0]
            delta = INFINITY
            j1 = 0
            for j in range(1, m + 1):
                if not used[j]:
                    cur = c[i0 - 1, j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col4row = np.zeros(n, dtype=np.int64)
    cdef long long[::1] out = col4row
    for j in range(1, m + 1):
        if p[j]:
            out[p[j] - 1] = j - 1
    return col4row, u_arr[1:].copy(), v_arr[1:].copy()


def iou_matrix(a, b):
    cdef double[:, ::1] A = np.ascontiguousarray(np.asarray(a, dtype=np.float64).reshape(-1, 4))
    cdef double[:, ::1] B = np.ascontiguousarray(np.asarray(b, dtype=np.float64).reshape(-1, 4))
    cdef Py_ssize_t na = A.shape[0], nb = B.shape[0], i, j
    res = np.zeros((na, nb))
    cdef double[:, ::1] out = res
    cdef double iw, ih, inter, union, area_a, area_b
    for i in range(na):
        area_a = (A[i, 2] - A[i, 0]) * (A[i, 3] - A[i, 1])
        for j in range(nb):
            iw = min(A[i, 2], B[j, 2]) - max(A[i, 0], B[j, 0])
            ih = min(A[i, 3], B[j, 3]) - max(A[i, 1], B[j, 1])
            if iw <= 0.0 or ih <= 0.0:
                continue
            inter = iw * ih
            area_b = (B[j, 2] - B[j, 0]) * (B[j, 3] - B[j, 1])
            union = area_a + area_b - inter
            if union > 0.0:
                out[i, j] = inter / union
    return res


def bin_events(x, y, t, p, double window_start, double window_len,
               Py_ssize_t n_slices, Py_ssize_t height, Py_ssize_t width):
    cdef long long[::1] xs = np.ascontiguousarray(x, dtype=np.int64)
    cdef long long[::1] ys = np.ascontiguousarray(y, dtype=np.int64)
    cdef double[::1] ts = np.ascontiguousarray(t, dtype=np.float64)
    cdef long long[::1] ps = np.ascontiguousarray(p, dtype=np.int64)
    counts = np.zeros((2, n_slices, height, width), dtype=np.int64)
    cdef long long[:, :, :, ::1] out = counts
    cdef double window_end = window_start + window_len
    cdef Py_ssize_t k, n = ts.shape[0], s, ch
    cdef long long binned = 0, dropped = 0
    cdef double tk
    for k in range(n):
        tk = ts[k]
        if tk < window_start or tk >= window_end:
            continue
        if xs[k] < 0 or xs[k] >= width or ys[k] < 0 or ys[k] >= height:
            dropped += 1
            continue
        s = <Py_ssize_t> floor((tk - window_start) / window_len * n_slices)
        if s > n_slices - 1:
            s = n_slices - 1
        ch = 0 if ps[k] > 0 else 1
        out[ch, s, ys[k], xs[k]] += 1
        binned += 1
    return counts, int(binned), int(dropped)


def project_points(points, double fx, double fy, double cx, double cy,
                   double k1, double k2, double k3, double p1, double p2,
                   bint apply_distortion):
    cdef double[:, ::1] P = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    cdef Py_ssize_t n = P.shape[0], i
    uv_arr = np.full((n, 2), np.nan)
    valid_arr = np.zeros(n, dtype=bool)
    cdef double[:, ::1] uv = uv_arr
    cdef cnp.npy_bool[::1] valid = valid_arr
    cdef double z, xn, yn, r2, radial, xd, yd
    for i in range(n):
        z = P[i, 2]
        if not z > 0.0:
            continue
        valid[i] = 1
        xn = P[i, 0] / z
        yn = P[i, 1] / z
        if apply_distortion:
            r2 = xn * xn + yn * yn
            radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3))
            xd = xn * radial + 2.0 * p1 * xn * yn + p2 * (r2 + 2.0 * xn * xn)
            yd = yn * radial + p1 * (r2 + 2.0 * yn * yn) + 2.0 * p2 * xn * yn
            xn = xd
            yn = yd
        uv[i, 0] = fx * xn + cx
        uv[i, 1] = fy * yn + cy
    return uv_arr, valid_arr
